#pragma once

// Differentiable tensor primitives. 2-D tensors are row-major; wherever a
// batch of sequences is involved, rows index sequences.

#include <functional>
#include <vector>

#include "samba/tensor.hpp"

namespace samba {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a[m x n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
// a[m x n] * gain[n] broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& gain);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor softplus(const Tensor& x);
Tensor silu(const Tensor& x);
// Softmax along `axis` of a rank-1 or rank-2 tensor (-1 = last).
Tensor softmax(const Tensor& x, int axis = -1);
// Normalizes the last axis of a rank-1 or rank-2 tensor, then applies the
// affine. A constant row maps to zeros before the affine.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
inline constexpr double kLayerNormEps = 1e-5;

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);
// Rank-1 rows of equal length stacked into [rows.size() x width].
Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t width);
// Row i of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& a, std::size_t i);
// Row j of every matrix in `mats`, stacked into [mats.size() x width].
Tensor gather_row(const std::vector<Tensor>& mats, std::size_t j, std::size_t width);
// Rolling history update: result row 0 is `latest`, row r is history row r-1.
Tensor shift_in(const Tensor& history, const Tensor& latest);

// Depthwise causal convolution over time. x: [T x C], kernel: [K x C] with
// row 0 the current-step tap, buffer: [(K-1) x C] holding the inputs preceding
// x (row 0 most recent).
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& buffer);
// Single streaming step of causal_conv1d for a batch. u: [k x C], lags[j]:
// [k x C] input at lag j+1.
Tensor conv_step(const Tensor& u, const std::vector<Tensor>& lags, const Tensor& kernel);

// Zero-order-hold discretization for a diagonal A = -exp(a_log).
// delta: [k x C] (strictly positive), a_log: [C x N]; outputs are [k x C*N].
Tensor zoh_decay(const Tensor& delta, const Tensor& a_log);
Tensor zoh_input_gain(const Tensor& delta, const Tensor& a_log);
inline constexpr double kZohTaylorThreshold = 1e-6;

// Long-term memory update. decayed: [k x C*N]; for observed rows adds
// b_coeff[c,n] * b_t[n] * x[c]; masked rows are a copy of `decayed`.
Tensor ltmu_update(const Tensor& decayed, const Tensor& b_coeff, const Tensor& b_t,
                   const Tensor& x, const std::vector<bool>& observe);
// y[i,c] = sum_n c_t[i,n] * h[i, c*N + n]
Tensor state_readout(const Tensor& h, const Tensor& c_t);

// Elementwise map with a caller-supplied derivative.
Tensor unary_map(const Tensor& x, std::function<double(double)> f,
                 std::function<double(double)> df);

}  // namespace samba
