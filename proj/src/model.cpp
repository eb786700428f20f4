#include "samba/model.hpp"

#include <cmath>

#include "samba/ops.hpp"

namespace samba::model {

void ModelConfig::validate() const {
  if (d_model == 0 || expand == 0 || d_state == 0 || d_conv == 0 || n_blocks == 0) {
    throw Error("model config: d_model, expand, d_state, d_conv and n_blocks must be >= 1");
  }
  if (n_heads == 0 || d_sync % n_heads != 0) {
    throw Error("model config: d_sync must be divisible by n_heads");
  }
}

BlockParams BlockParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model, c = cfg.inner(), k = cfg.d_conv;
  BlockParams p;
  p.norm_gain = constant_parameter({d}, 1.0);
  p.norm_bias = constant_parameter({d}, 0.0);
  p.w_in = normal_parameter({d, 2 * c}, 1.0 / std::sqrt(double(d)), rng);
  p.conv_kernel = uniform_parameter({k, c}, 1.0 / std::sqrt(double(k)), rng);
  p.ssm = ssm::SelectiveSsmParams::init(c, cfg.d_state, cfg.rank(), rng);
  p.sync = sync::SyncParams::init(c * cfg.d_state, cfg.d_sync, cfg.n_heads, cfg.n_sync, rng);
  p.w_out = normal_parameter({c, d}, 1.0 / std::sqrt(double(c)), rng);
  return p;
}

void BlockParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "norm_gain", norm_gain);
  fn(prefix + "norm_bias", norm_bias);
  fn(prefix + "w_in", w_in);
  fn(prefix + "conv_kernel", conv_kernel);
  ssm.visit(prefix + "ssm.", fn);
  sync.visit(prefix + "sync.", fn);
  fn(prefix + "w_out", w_out);
}

UnitParams UnitParams::init(const ModelConfig& cfg, Rng& rng) {
  UnitParams p;
  p.config = cfg;
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) p.blocks.push_back(BlockParams::init(cfg, rng));
  return p;
}

void UnitParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].visit(prefix + "blocks." + std::to_string(b) + ".", fn);
}

SambaState SambaState::newborn(const ModelConfig& cfg) {
  SambaState s;
  const std::size_t c = cfg.inner();
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    s.blocks.push_back({Tensor::zeros({c * cfg.d_state}), Tensor::zeros({cfg.d_conv - 1, c})});
  }
  return s;
}

SambaState SambaState::detached() const {
  SambaState s;
  for (const BlockState& b : blocks) s.blocks.push_back({b.h.detach(), b.conv_buffer.detach()});
  return s;
}

Tensor block_step(const BlockParams& p, const ModelConfig& cfg, std::size_t block,
                  std::span<SambaState> states, const Tensor& xs, const std::vector<bool>& observe) {
  const std::size_t k = states.size();
  const std::size_t d = cfg.d_model, c = cfg.inner(), n = cfg.d_state;
  if (xs.rank() != 2 || xs.dim(0) != k || xs.dim(1) != d || observe.size() != k) {
    throw ShapeError("block_step: " + std::to_string(k) + " states, " +
                     std::to_string(observe.size()) + " masks and inputs " + to_string(xs.shape()));
  }
  if (k == 0) return Tensor::zeros({0, d});

  const Tensor proj = matmul(layer_norm(xs, p.norm_gain, p.norm_bias), p.w_in);
  const Tensor u = slice_cols(proj, 0, c);
  const Tensor z = slice_cols(proj, c, 2 * c);

  std::vector<Tensor> buffers, hidden;
  buffers.reserve(k);
  hidden.reserve(k);
  for (const SambaState& s : states) {
    buffers.push_back(s.blocks.at(block).conv_buffer);
    hidden.push_back(s.blocks.at(block).h);
  }
  std::vector<Tensor> lags;
  for (std::size_t j = 0; j + 1 < cfg.d_conv; ++j) lags.push_back(gather_row(buffers, j, c));
  const Tensor x = silu(conv_step(u, lags, p.conv_kernel));

  const ssm::Selection sel = ssm::selectivity(p.ssm, x);
  const ssm::Discretized disc = ssm::discretize_zoh(sel.delta, p.ssm);
  const Tensor decayed = mul(disc.a_bar, stack_rows(hidden, c * n));

  Tensor h_sync;
  switch (cfg.sync_mode) {
    case sync::SyncMode::disabled:
      h_sync = ltmu_update(decayed, disc.b_coeff, sel.b_t, x, observe);
      break;
    case sync::SyncMode::posterior:
      h_sync = sync::synchronize(p.sync, ltmu_update(decayed, disc.b_coeff, sel.b_t, x, observe));
      break;
    case sync::SyncMode::prior:
      h_sync = ltmu_update(sync::synchronize(p.sync, decayed), disc.b_coeff, sel.b_t, x, observe);
      break;
  }

  const Tensor y = ssm::output_update(h_sync, sel.c_t);
  const Tensor out = add(matmul(mul(y, silu(z)), p.w_out), xs);

  for (std::size_t i = 0; i < k; ++i) {
    BlockState& bs = states[i].blocks[block];
    bs.h = row(h_sync, i);
    bs.conv_buffer = shift_in(bs.conv_buffer, row(u, i));
  }
  return out;
}

Tensor unit_step(const UnitParams& p, std::span<SambaState> states, const Tensor& xs,
                 const std::vector<bool>& observe) {
  Tensor y = xs;
  for (std::size_t b = 0; b < p.blocks.size(); ++b)
    y = block_step(p.blocks[b], p.config, b, states, y, observe);
  return y;
}

std::vector<bool> observation_mask(std::span<const double> conf, double tau_mask) {
  std::vector<bool> observe(conf.size());
  for (std::size_t i = 0; i < conf.size(); ++i) observe[i] = conf[i] > tau_mask;
  return observe;
}

Tensor set_step(const UnitParams& p, std::span<SambaState> states, const Tensor& xs,
                std::span<const double> conf, double tau_mask) {
  if (conf.size() != states.size()) throw ShapeError("set_step: conf and states misaligned");
  for (double v : conf) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("set_step: confidence outside [0, 1]");
  }
  return unit_step(p, states, xs, observation_mask(conf, tau_mask));
}

std::vector<Tensor> rollout(const UnitParams& p, std::span<SambaState> states,
                            const std::vector<Tensor>& xs,
                            const std::vector<std::vector<double>>& conf, double tau_mask) {
  if (xs.size() != conf.size()) throw ShapeError("rollout: inputs and confidences misaligned");
  std::vector<Tensor> ys;
  ys.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) ys.push_back(set_step(p, states, xs[t], conf[t], tau_mask));
  return ys;
}

}  // namespace samba::model
