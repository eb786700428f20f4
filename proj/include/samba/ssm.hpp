#pragma once

// Selective state-space recurrence with a diagonal, strictly negative A.
//
// Batched layout: every function takes one row per sequence. A hidden state
// for k sequences is a [k x C*N] tensor whose row i is the row-major
// flattening of that sequence's C x N state. A single sequence is k = 1.

#include <cstddef>
#include <vector>

#include "samba/init.hpp"
#include "samba/tensor.hpp"

namespace samba::ssm {

struct SelectiveSsmParams {
  std::size_t channels = 0;  // C
  std::size_t state = 0;     // N
  std::size_t rank = 0;      // r, rank of the step-size projection

  Tensor a_log;         // [C x N], A = -exp(a_log)
  Tensor delta_bias;    // [C]
  Tensor w_delta_down;  // [C x r]
  Tensor w_delta_up;    // [r x C]
  Tensor w_b;           // [C x N]
  Tensor w_c;           // [C x N]

  static SelectiveSsmParams init(std::size_t channels, std::size_t state, std::size_t rank,
                                 Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// max(1, ceil(C / 16))
std::size_t default_rank(std::size_t channels);

struct Selection {
  Tensor delta;  // [k x C], strictly positive
  Tensor b_t;    // [k x N]
  Tensor c_t;    // [k x N]
};

Selection selectivity(const SelectiveSsmParams& p, const Tensor& x);

struct Discretized {
  Tensor a_bar;    // [k x C*N]
  Tensor b_coeff;  // [k x C*N]
};

Discretized discretize_zoh(const Tensor& delta, const SelectiveSsmParams& p);

// h = a_bar * h_prev + [observe] * b_coeff * b_t * x, with Delta, B and C
// computed from x whether or not the row is observed.
Tensor ltmu_step(const SelectiveSsmParams& p, const Tensor& h_prev, const Tensor& x,
                 const std::vector<bool>& observe);

// y[c] = sum_n c_t[n] * h[c, n]
Tensor output_update(const Tensor& h_sync, const Tensor& c_t);

struct ScanResult {
  Tensor ys;       // [T x C]
  Tensor h_final;  // [C x N]
};

// Unsynchronized recurrence over one sequence starting from h = 0.
ScanResult scan(const SelectiveSsmParams& p, const Tensor& xs, const std::vector<bool>& observe);

}  // namespace samba::ssm
