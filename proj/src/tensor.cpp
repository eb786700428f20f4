#include "samba/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace samba {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_next_seq = 1;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     to_string(shape));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor: non-finite value in leaf");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->seq = g_next_seq++;
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

double* detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> v(samba::numel(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(v)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw Error("tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("tensor: axis out of range for " + to_string(s));
  return s[axis];
}

std::span<const double> Tensor::data() const {
  if (!node_) throw Error("tensor: use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw Error("tensor: mutable_data on a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("tensor: item() on " + to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw ShapeError("tensor: at(i,j) on " + to_string(shape()));
  return node_->data[i * node_->shape[1] + j];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw Error("tensor: requires_grad can only be set on leaves");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_ && !node_->backward; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw Error("tensor: use of undefined tensor");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return from(shape(), node_->data); }

Tensor Tensor::clone_leaf() const {
  Tensor t = from(shape(), node_->data);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

std::uint64_t Tensor::sequence() const { return node_ ? node_->seq : 0; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tape Tape::reachable_from(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> seen;
  std::vector<detail::Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    tape.nodes_.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  // Inputs are always created before their consumers.
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });
  return tape;
}

std::vector<std::uint64_t> Tape::visit_order() const {
  std::vector<std::uint64_t> out;
  out.reserve(nodes_.size());
  for (const auto* n : nodes_) out.push_back(n->seq);
  return out;
}

void Tape::run_backward() const {
  for (detail::Node* n : nodes_) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar");
  }
  if (!loss.requires_grad()) {
    throw Error("backward: loss was not produced under gradient tracking");
  }
  const Tape tape = Tape::reachable_from(loss);
  loss.node()->grad_buffer()[0] += 1.0;
  tape.run_backward();
}

Tensor finite_diff(const std::function<double()>& f, Tensor& theta, double eps) {
  std::span<double> x = theta.mutable_data();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f();
    x[i] = orig - eps;
    const double fm = f();
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return Tensor::from(theta.shape(), std::move(g));
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double b = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

}  // namespace samba
