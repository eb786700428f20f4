#pragma once

// Memory synchronization across a set of hidden states: each state becomes a
// single token, tokens pass through pre-norm self-attention + feed-forward
// blocks, and the result is projected back and added to the input state.
// There is no positional information over the set axis, so the map is
// permutation-equivariant and accepts any number of states.

#include <string>
#include <string_view>
#include <vector>

#include "samba/init.hpp"
#include "samba/tensor.hpp"

namespace samba::sync {

enum class SyncMode { disabled, prior, posterior };

SyncMode parse_sync_mode(std::string_view name);
std::string_view to_string(SyncMode mode);

struct SyncLayer {
  Tensor ln1_gain, ln1_bias;  // [d]
  Tensor w_q, w_k, w_v, w_o;  // [d x d]
  Tensor ln2_gain, ln2_bias;  // [d]
  Tensor w_ff1, b_ff1;        // [d x d_ff], [d_ff]
  Tensor w_ff2, b_ff2;        // [d_ff x d], [d]
};

struct SyncParams {
  std::size_t state_dim = 0;  // C*N
  std::size_t d_sync = 0;
  std::size_t n_heads = 0;
  Tensor w_down;  // [C*N x d_sync]
  std::vector<SyncLayer> layers;
  Tensor w_up;  // [d_sync x C*N], zero at init

  static SyncParams init(std::size_t state_dim, std::size_t d_sync, std::size_t n_heads,
                         std::size_t n_layers, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// h: [k x C*N], one row per sequence.
Tensor synchronize(const SyncParams& p, const Tensor& h);

// List form: each state is [C x N] (or flat [C*N]); all must share a shape.
std::vector<Tensor> synchronize(const SyncParams& p, const std::vector<Tensor>& states);

}  // namespace samba::sync
