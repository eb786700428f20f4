#pragma once

// Dense f64 tensors with a dynamic reverse-mode tape.
//
// A Tensor is a cheap handle to a shared node. Values are immutable after
// construction; only gradient buffers (and leaf parameters, through
// mutable_data) change. When gradient tracking is enabled and any input
// requires a gradient, an op records its inputs and a backward closure on the
// output node. Nodes carry a per-thread creation sequence number, so the tape
// is the set of nodes reachable from a loss ordered by that number.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace samba {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Gradient buffer, allocated (zeroed) on first use.
  double* grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // A leaf that participates in gradient tracking.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<const double> data() const;
  // Leaves only. Used by optimizers and finite differences.
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, no history, no gradient tracking.
  Tensor detach() const;
  // Deep copy that keeps the requires_grad flag (for leaves).
  Tensor clone_leaf() const;

  const char* op_name() const;
  std::uint64_t sequence() const;

  // Internal: op construction and the backward pass.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Gradient mode is per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// The recorded computation reachable from a root, in reverse creation order.
class Tape {
 public:
  static Tape reachable_from(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  // Sequence numbers in visiting order (strictly decreasing).
  std::vector<std::uint64_t> visit_order() const;
  void run_backward() const;

 private:
  std::vector<detail::Node*> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and accumulates into every tracked leaf.
void backward(const Tensor& loss);

// Central differences of a scalar function with respect to every element of
// theta. theta must be a leaf; its values are restored afterwards.
Tensor finite_diff(const std::function<double()>& f, Tensor& theta, double eps = 1e-5);

// max(|a|,|b|,1e-8)-normalized elementwise error, maximized.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

}  // namespace samba
