#pragma once

// Samba blocks, units and the set-of-sequences step.
//
// A block wraps the synchronized selective SSM Mamba-style: pre-LayerNorm,
// input projection into an SSM path u and a gate path z, depthwise causal
// convolution + SiLU on u, LTMU per sequence, one joint synchronization over
// all sequences, readout, SiLU(z) gating, output projection and a residual.
// A unit is a stack of blocks. All sequences share one set of weights.

#include <span>
#include <vector>

#include "samba/init.hpp"
#include "samba/ssm.hpp"
#include "samba/sync.hpp"
#include "samba/tensor.hpp"

namespace samba::model {

struct ModelConfig {
  std::size_t d_model = 32;  // D
  std::size_t expand = 2;    // E
  std::size_t d_state = 16;  // N
  std::size_t d_conv = 4;    // K
  std::size_t n_blocks = 2;
  std::size_t n_sync = 1;
  std::size_t d_sync = 64;
  std::size_t n_heads = 4;
  std::size_t dt_rank = 0;  // 0 selects max(1, ceil(E*D / 16))
  sync::SyncMode sync_mode = sync::SyncMode::posterior;

  std::size_t inner() const { return expand * d_model; }
  std::size_t rank() const { return dt_rank ? dt_rank : ssm::default_rank(inner()); }
  void validate() const;
};

struct BlockParams {
  Tensor norm_gain, norm_bias;  // [D]
  Tensor w_in;                  // [D x 2C]
  Tensor conv_kernel;           // [K x C], row 0 is the current-step tap
  ssm::SelectiveSsmParams ssm;
  sync::SyncParams sync;
  Tensor w_out;  // [C x D]

  static BlockParams init(const ModelConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct UnitParams {
  ModelConfig config;
  std::vector<BlockParams> blocks;

  static UnitParams init(const ModelConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct BlockState {
  Tensor h;            // [C*N], row-major C x N
  Tensor conv_buffer;  // [(K-1) x C], row 0 the most recent projected input
};

struct SambaState {
  std::vector<BlockState> blocks;

  // All zeros.
  static SambaState newborn(const ModelConfig& cfg);
  // Values without history (for truncated training).
  SambaState detached() const;
};

// One block over k sequences. xs: [k x D]. Updates states[i].blocks[block].
Tensor block_step(const BlockParams& p, const ModelConfig& cfg, std::size_t block,
                  std::span<SambaState> states, const Tensor& xs, const std::vector<bool>& observe);

Tensor unit_step(const UnitParams& p, std::span<SambaState> states, const Tensor& xs,
                 const std::vector<bool>& observe);

// observe[i] = conf[i] > tau_mask
std::vector<bool> observation_mask(std::span<const double> conf, double tau_mask);

// (Y, H) = Phi(X, H_prev)
Tensor set_step(const UnitParams& p, std::span<SambaState> states, const Tensor& xs,
                std::span<const double> conf, double tau_mask);

// T consecutive set steps over a fixed set; xs[t] is [k x D].
std::vector<Tensor> rollout(const UnitParams& p, std::span<SambaState> states,
                            const std::vector<Tensor>& xs,
                            const std::vector<std::vector<double>>& conf, double tau_mask);

}  // namespace samba::model
