#include "samba/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "samba/kernels.hpp"

namespace samba {

namespace {

using detail::Node;

// Builds an op output. History is attached only when tracking is on and some
// input needs a gradient.
Tensor record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
              const char* op, std::function<void(Node&)> bw) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
  }
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  Node& node = *out.node();
  node.op = op;
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  if (!needs) return out;
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) node.inputs.push_back(t.node());
  node.backward = std::move(bw);
  return out;
}

// Gradient buffer of input i, or nullptr when that input is untracked.
double* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer() : nullptr;
}

const std::vector<double>& data_of(const Node& self, std::size_t i) { return self.inputs[i]->data; }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& x) {
  if (x.rank() == 1) return {1, x.dim(0)};
  if (x.rank() == 2) return {x.dim(0), x.dim(1)};
  throw ShapeError("expected rank 1 or 2, got " + to_string(x.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " * " +
                     to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::active().gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return record({m, n}, std::move(out), {a, b}, "matmul", [m, n, k](Node& self) {
    const auto& kb = kernels::active();
    const double* g = self.grad.data();
    if (double* ga = grad_of(self, 0)) kb.gemm_nt(m, k, n, g, data_of(self, 1).data(), ga, true);
    if (double* gb = grad_of(self, 1)) kb.gemm_tn(k, n, m, data_of(self, 0).data(), g, gb, true);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return record({n, m}, std::move(out), {a}, "transpose", [m, n](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  kernels::active().add(out.size(), a.data().data(), b.data().data(), out.data());
  return record(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    const auto& kb = kernels::active();
    for (std::size_t i = 0; i < 2; ++i)
      if (double* g = grad_of(self, i)) kb.axpy(self.grad.size(), 1.0, self.grad.data(), g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return record(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    const auto& kb = kernels::active();
    if (double* g = grad_of(self, 0)) kb.axpy(self.grad.size(), 1.0, self.grad.data(), g);
    if (double* g = grad_of(self, 1)) kb.axpy(self.grad.size(), -1.0, self.grad.data(), g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  kernels::active().mul(out.size(), a.data().data(), b.data().data(), out.data());
  return record(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    const auto& kb = kernels::active();
    const std::size_t n = self.grad.size();
    if (double* g = grad_of(self, 0)) kb.mul_acc(n, self.grad.data(), data_of(self, 1).data(), g);
    if (double* g = grad_of(self, 1)) kb.mul_acc(n, self.grad.data(), data_of(self, 0).data(), g);
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= s;
  return record(a.shape(), std::move(out), {a}, "scale", [s](Node& self) {
    kernels::active().axpy(self.grad.size(), s, self.grad.data(), grad_of(self, 0));
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_row");
  require_rank(bias, 1, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.dim(0) != n) throw ShapeError("add_row: bias length differs from column count");
  std::vector<double> out(m * n);
  const auto x = a.data(), b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + b[j];
  return record({m, n}, std::move(out), {a, bias}, "add_row", [m, n](Node& self) {
    const auto& kb = kernels::active();
    if (double* ga = grad_of(self, 0)) kb.axpy(m * n, 1.0, self.grad.data(), ga);
    if (double* gb = grad_of(self, 1))
      for (std::size_t i = 0; i < m; ++i) kb.axpy(n, 1.0, self.grad.data() + i * n, gb);
  });
}

Tensor mul_row(const Tensor& a, const Tensor& gain) {
  require_rank(a, 2, "mul_row");
  require_rank(gain, 1, "mul_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (gain.dim(0) != n) throw ShapeError("mul_row: gain length differs from column count");
  std::vector<double> out(m * n);
  const auto x = a.data(), g = gain.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] * g[j];
  return record({m, n}, std::move(out), {a, gain}, "mul_row", [m, n](Node& self) {
    const auto& x = data_of(self, 0);
    const auto& gn = data_of(self, 1);
    const double* g = self.grad.data();
    if (double* ga = grad_of(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * gn[j];
    if (double* gg = grad_of(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * x[i * n + j];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return record({}, {s}, {a}, "sum", [](Node& self) {
    double* g = grad_of(self, 0);
    const std::size_t n = self.inputs[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor softplus(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus_scalar(v[i]);
  return record(x.shape(), std::move(out), {x}, "softplus", [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& v = data_of(self, 0);
    for (std::size_t i = 0; i < v.size(); ++i) g[i] += self.grad[i] * sigmoid(v[i]);
  });
}

Tensor silu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * sigmoid(v[i]);
  return record(x.shape(), std::move(out), {x}, "silu", [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& v = data_of(self, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double s = sigmoid(v[i]);
      g[i] += self.grad[i] * s * (1.0 + v[i] * (1.0 - s));
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const int last = static_cast<int>(x.rank()) - 1;
  if (axis < 0) axis += static_cast<int>(x.rank());
  if (axis < 0 || axis > last) throw ShapeError("softmax: axis out of range");
  if (axis != last) return transpose(softmax(transpose(x), -1));
  const auto [m, n] = rows_cols(x);
  std::vector<double> out(m * n);
  const auto v = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = v.data() + i * n;
    double* o = out.data() + i * n;
    const double mx = n ? *std::max_element(r, r + n) : 0.0;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return record(x.shape(), std::move(out), {x}, "softmax", [m = m, n = n](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.data.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - s);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const auto [m, n] = rows_cols(x);
  require_rank(gain, 1, "layer_norm");
  require_rank(bias, 1, "layer_norm");
  if (gain.dim(0) != n || bias.dim(0) != n) throw ShapeError("layer_norm: affine length mismatch");
  if (n == 0) throw ShapeError("layer_norm: empty feature axis");
  const auto v = x.data(), gn = gain.data(), bs = bias.data();
  std::vector<double> xhat(m * n), rstd(m), out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = v.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += r[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    const bool constant = std::all_of(r, r + n, [&](double e) { return e == r[0]; });
    for (std::size_t j = 0; j < n; ++j) {
      const double h = constant ? 0.0 : (r[j] - mu) * rstd[i];
      xhat[i * n + j] = h;
      out[i * n + j] = h * gn[j] + bs[j];
    }
  }
  return record(x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
                [m = m, n = n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                  const auto& gn = data_of(self, 1);
                  const double* g = self.grad.data();
                  if (double* gx = grad_of(self, 0)) {
                    std::vector<double> gh(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mg = 0.0, mgx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        gh[j] = g[i * n + j] * gn[j];
                        mg += gh[j];
                        mgx += gh[j] * xhat[i * n + j];
                      }
                      mg /= static_cast<double>(n);
                      mgx /= static_cast<double>(n);
                      for (std::size_t j = 0; j < n; ++j)
                        gx[i * n + j] += rstd[i] * (gh[j] - mg - xhat[i * n + j] * mgx);
                    }
                  }
                  if (double* gg = grad_of(self, 1))
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                  if (double* gb = grad_of(self, 2))
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (begin > end || end > n) throw ShapeError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.data() + i * n + begin, w, out.data() + i * w);
  return record({m, w}, std::move(out), {a}, "slice_cols", [m, n, w, begin](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> offsets;
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row counts differ");
    offsets.push_back(n);
    n += p.dim(1);
  }
  std::vector<double> out(m * n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].dim(1);
    const auto x = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(x.data() + i * w, w, out.data() + i * n + offsets[k]);
  }
  return record({m, n}, std::move(out), parts, "concat_cols", [m, n, offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      double* g = grad_of(self, k);
      if (!g) continue;
      const std::size_t w = self.inputs[k]->shape[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + offsets[k] + j];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return record(std::move(shape), std::move(out), {a}, "reshape", [](Node& self) {
    kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), grad_of(self, 0));
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t width) {
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.dim(0) != width) {
      throw ShapeError("stack_rows: expected rank-1 rows of length " + std::to_string(width) +
                       ", got " + to_string(r.shape()));
    }
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return record({rows.size(), width}, std::move(out), rows, "stack_rows", [width](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (double* g = grad_of(self, i))
        kernels::active().axpy(width, 1.0, self.grad.data() + i * width, g);
  });
}

Tensor row(const Tensor& a, std::size_t i) {
  require_rank(a, 2, "row");
  const std::size_t n = a.dim(1);
  if (i >= a.dim(0)) throw ShapeError("row: index out of range");
  std::vector<double> out(a.data().begin() + i * n, a.data().begin() + (i + 1) * n);
  return record({n}, std::move(out), {a}, "row", [i, n](Node& self) {
    kernels::active().axpy(n, 1.0, self.grad.data(), grad_of(self, 0) + i * n);
  });
}

Tensor gather_row(const std::vector<Tensor>& mats, std::size_t j, std::size_t width) {
  std::vector<double> out;
  out.reserve(mats.size() * width);
  for (const Tensor& m : mats) {
    require_rank(m, 2, "gather_row");
    if (m.dim(1) != width || j >= m.dim(0)) throw ShapeError("gather_row: shape mismatch");
    out.insert(out.end(), m.data().begin() + j * width, m.data().begin() + (j + 1) * width);
  }
  return record({mats.size(), width}, std::move(out), mats, "gather_row", [j, width](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (double* g = grad_of(self, i))
        kernels::active().axpy(width, 1.0, self.grad.data() + i * width, g + j * width);
  });
}

Tensor shift_in(const Tensor& history, const Tensor& latest) {
  require_rank(history, 2, "shift_in");
  require_rank(latest, 1, "shift_in");
  const std::size_t rows = history.dim(0), c = history.dim(1);
  if (latest.dim(0) != c) throw ShapeError("shift_in: width mismatch");
  std::vector<double> out(rows * c);
  if (rows > 0) {
    std::copy_n(latest.data().data(), c, out.data());
    std::copy_n(history.data().data(), (rows - 1) * c, out.data() + c);
  }
  return record({rows, c}, std::move(out), {history, latest}, "shift_in", [rows, c](Node& self) {
    if (rows == 0) return;
    const auto& kb = kernels::active();
    if (double* gh = grad_of(self, 0)) kb.axpy((rows - 1) * c, 1.0, self.grad.data() + c, gh);
    if (double* gl = grad_of(self, 1)) kb.axpy(c, 1.0, self.grad.data(), gl);
  });
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& buffer) {
  require_rank(x, 2, "causal_conv1d");
  require_rank(kernel, 2, "causal_conv1d");
  require_rank(buffer, 2, "causal_conv1d");
  const std::size_t t_len = x.dim(0), c = x.dim(1), k = kernel.dim(0);
  if (k == 0 || kernel.dim(1) != c) throw ShapeError("causal_conv1d: kernel shape mismatch");
  if (buffer.dim(0) + 1 != k || buffer.dim(1) != c) {
    throw ShapeError("causal_conv1d: buffer must hold kernel length - 1 rows");
  }
  const auto xv = x.data(), kv = kernel.data(), bv = buffer.data();
  // Input at time s (negative s reads the buffer).
  auto at = [&](std::ptrdiff_t s, std::size_t ch) {
    return s >= 0 ? xv[static_cast<std::size_t>(s) * c + ch]
                  : bv[static_cast<std::size_t>(-s - 1) * c + ch];
  };
  std::vector<double> out(t_len * c);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        acc += kv[j * c + ch] * at(static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(j), ch);
      out[t * c + ch] = acc;
    }
  }
  return record({t_len, c}, std::move(out), {x, kernel, buffer}, "causal_conv1d",
                [t_len, c, k](Node& self) {
                  const auto& xv = data_of(self, 0);
                  const auto& kv = data_of(self, 1);
                  const auto& bv = data_of(self, 2);
                  double* gx = grad_of(self, 0);
                  double* gk = grad_of(self, 1);
                  double* gb = grad_of(self, 2);
                  for (std::size_t t = 0; t < t_len; ++t) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const auto s = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(j);
                      for (std::size_t ch = 0; ch < c; ++ch) {
                        const double g = self.grad[t * c + ch];
                        const std::size_t idx = s >= 0 ? static_cast<std::size_t>(s) * c + ch
                                                       : static_cast<std::size_t>(-s - 1) * c + ch;
                        const double in = s >= 0 ? xv[idx] : bv[idx];
                        if (gk) gk[j * c + ch] += g * in;
                        if (s >= 0 && gx) gx[idx] += g * kv[j * c + ch];
                        if (s < 0 && gb) gb[idx] += g * kv[j * c + ch];
                      }
                    }
                  }
                });
}

Tensor conv_step(const Tensor& u, const std::vector<Tensor>& lags, const Tensor& kernel) {
  require_rank(u, 2, "conv_step");
  require_rank(kernel, 2, "conv_step");
  const std::size_t rows = u.dim(0), c = u.dim(1), k = kernel.dim(0);
  if (kernel.dim(1) != c) throw ShapeError("conv_step: kernel width mismatch");
  if (lags.size() + 1 != k) throw ShapeError("conv_step: kernel length mismatch with buffer");
  for (const Tensor& l : lags) require_same(l, u, "conv_step");
  std::vector<const double*> src{u.data().data()};
  for (const Tensor& l : lags) src.push_back(l.data().data());
  const auto kv = kernel.data();
  std::vector<double> out(rows * c);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += kv[j * c + ch] * src[j][i * c + ch];
      out[i * c + ch] = acc;
    }
  }
  std::vector<Tensor> inputs{u};
  inputs.insert(inputs.end(), lags.begin(), lags.end());
  inputs.push_back(kernel);
  return record({rows, c}, std::move(out), inputs, "conv_step", [rows, c, k](Node& self) {
    const auto& kv = self.inputs[k]->data;
    double* gk = grad_of(self, k);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& in = self.inputs[j]->data;
      double* gin = grad_of(self, j);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double g = self.grad[i * c + ch];
          if (gin) gin[i * c + ch] += g * kv[j * c + ch];
          if (gk) gk[j * c + ch] += g * in[i * c + ch];
        }
      }
    }
  });
}

namespace {

void check_zoh_shapes(const Tensor& delta, const Tensor& a_log, const char* op) {
  require_rank(delta, 2, op);
  require_rank(a_log, 2, op);
  if (delta.dim(1) != a_log.dim(0)) {
    throw ShapeError(std::string(op) + ": delta channels differ from A rows");
  }
  for (double d : delta.data()) {
    if (!(d > 0.0)) throw Error(std::string(op) + ": step size must be strictly positive");
  }
}

}  // namespace

Tensor zoh_decay(const Tensor& delta, const Tensor& a_log) {
  check_zoh_shapes(delta, a_log, "zoh_decay");
  const std::size_t rows = delta.dim(0), c = a_log.dim(0), n = a_log.dim(1);
  const auto dv = delta.data(), av = a_log.data();
  std::vector<double> out(rows * c * n);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < n; ++s)
        out[(i * c + ch) * n + s] = std::exp(dv[i * c + ch] * -std::exp(av[ch * n + s]));
  return record({rows, c * n}, std::move(out), {delta, a_log}, "zoh_decay",
                [rows, c, n](Node& self) {
                  const auto& dv = data_of(self, 0);
                  const auto& av = data_of(self, 1);
                  double* gd = grad_of(self, 0);
                  double* ga = grad_of(self, 1);
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t s = 0; s < n; ++s) {
                        const std::size_t o = (i * c + ch) * n + s;
                        const double a = -std::exp(av[ch * n + s]);
                        const double d = dv[i * c + ch];
                        const double g = self.grad[o] * self.data[o];
                        if (gd) gd[i * c + ch] += g * a;
                        if (ga) ga[ch * n + s] += g * d * a;
                      }
                });
}

Tensor zoh_input_gain(const Tensor& delta, const Tensor& a_log) {
  check_zoh_shapes(delta, a_log, "zoh_input_gain");
  const std::size_t rows = delta.dim(0), c = a_log.dim(0), n = a_log.dim(1);
  const auto dv = delta.data(), av = a_log.data();
  std::vector<double> out(rows * c * n);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < n; ++s) {
        const double a = -std::exp(av[ch * n + s]);
        const double d = dv[i * c + ch];
        const double da = d * a;
        out[(i * c + ch) * n + s] =
            std::abs(da) < kZohTaylorThreshold ? d * (1.0 + da / 2.0) : std::expm1(da) / a;
      }
  return record({rows, c * n}, std::move(out), {delta, a_log}, "zoh_input_gain",
                [rows, c, n](Node& self) {
                  const auto& dv = data_of(self, 0);
                  const auto& av = data_of(self, 1);
                  double* gd = grad_of(self, 0);
                  double* ga = grad_of(self, 1);
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t s = 0; s < n; ++s) {
                        const std::size_t o = (i * c + ch) * n + s;
                        const double a = -std::exp(av[ch * n + s]);
                        const double d = dv[i * c + ch];
                        const double da = d * a;
                        const double g = self.grad[o];
                        double dd, dalog;  // d/d(delta), d/d(a_log)
                        if (std::abs(da) < kZohTaylorThreshold) {
                          dd = 1.0 + da;
                          dalog = d * da / 2.0;
                        } else {
                          const double e = std::exp(da);
                          dd = e;
                          dalog = (da * e - std::expm1(da)) / a;
                        }
                        if (gd) gd[i * c + ch] += g * dd;
                        if (ga) ga[ch * n + s] += g * dalog;
                      }
                });
}

Tensor ltmu_update(const Tensor& decayed, const Tensor& b_coeff, const Tensor& b_t,
                   const Tensor& x, const std::vector<bool>& observe) {
  require_rank(decayed, 2, "ltmu_update");
  require_same(decayed, b_coeff, "ltmu_update");
  require_rank(b_t, 2, "ltmu_update");
  require_rank(x, 2, "ltmu_update");
  const std::size_t rows = decayed.dim(0), c = x.dim(1), n = b_t.dim(1);
  if (b_t.dim(0) != rows || x.dim(0) != rows || decayed.dim(1) != c * n ||
      observe.size() != rows) {
    throw ShapeError("ltmu_update: shape mismatch");
  }
  std::vector<double> out(decayed.data().begin(), decayed.data().end());
  const auto bc = b_coeff.data(), bt = b_t.data(), xv = x.data();
  for (std::size_t i = 0; i < rows; ++i) {
    if (!observe[i]) continue;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t o = (i * c + ch) * n + s;
        out[o] += bc[o] * bt[i * n + s] * xv[i * c + ch];
      }
  }
  return record(decayed.shape(), std::move(out), {decayed, b_coeff, b_t, x}, "ltmu_update",
                [rows, c, n, observe](Node& self) {
                  if (double* gdec = grad_of(self, 0))
                    kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), gdec);
                  const auto& bc = data_of(self, 1);
                  const auto& bt = data_of(self, 2);
                  const auto& xv = data_of(self, 3);
                  double* gbc = grad_of(self, 1);
                  double* gbt = grad_of(self, 2);
                  double* gx = grad_of(self, 3);
                  for (std::size_t i = 0; i < rows; ++i) {
                    if (!observe[i]) continue;
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t s = 0; s < n; ++s) {
                        const std::size_t o = (i * c + ch) * n + s;
                        const double g = self.grad[o];
                        const double xb = xv[i * c + ch];
                        if (gbc) gbc[o] += g * bt[i * n + s] * xb;
                        if (gbt) gbt[i * n + s] += g * bc[o] * xb;
                        if (gx) gx[i * c + ch] += g * bc[o] * bt[i * n + s];
                      }
                  }
                });
}

Tensor state_readout(const Tensor& h, const Tensor& c_t) {
  require_rank(h, 2, "state_readout");
  require_rank(c_t, 2, "state_readout");
  const std::size_t rows = h.dim(0), n = c_t.dim(1);
  if (c_t.dim(0) != rows || n == 0 || h.dim(1) % n != 0) {
    throw ShapeError("state_readout: shape mismatch");
  }
  const std::size_t c = h.dim(1) / n;
  std::vector<double> out(rows * c);
  const auto hv = h.data(), cv = c_t.data();
  const auto& kb = kernels::active();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      out[i * c + ch] = kb.dot(n, cv.data() + i * n, hv.data() + (i * c + ch) * n);
  return record({rows, c}, std::move(out), {h, c_t}, "state_readout", [rows, c, n](Node& self) {
    const auto& hv = data_of(self, 0);
    const auto& cv = data_of(self, 1);
    double* gh = grad_of(self, 0);
    double* gc = grad_of(self, 1);
    const auto& kb = kernels::active();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = self.grad[i * c + ch];
        if (gh) kb.axpy(n, g, cv.data() + i * n, gh + (i * c + ch) * n);
        if (gc) kb.axpy(n, g, hv.data() + (i * c + ch) * n, gc + i * n);
      }
  });
}

Tensor unary_map(const Tensor& x, std::function<double(double)> f,
                 std::function<double(double)> df) {
  std::vector<double> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(v[i]);
  return record(x.shape(), std::move(out), {x}, "unary_map", [df = std::move(df)](Node& self) {
    double* g = grad_of(self, 0);
    const auto& v = data_of(self, 0);
    for (std::size_t i = 0; i < v.size(); ++i) g[i] += self.grad[i] * df(v[i]);
  });
}

}  // namespace samba
