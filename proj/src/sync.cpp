#include "samba/sync.hpp"

#include <cmath>

#include "samba/ops.hpp"

namespace samba::sync {

SyncMode parse_sync_mode(std::string_view name) {
  if (name == "disabled") return SyncMode::disabled;
  if (name == "prior") return SyncMode::prior;
  if (name == "posterior") return SyncMode::posterior;
  throw Error("unknown sync mode '" + std::string(name) + "' (expected disabled|prior|posterior)");
}

std::string_view to_string(SyncMode mode) {
  switch (mode) {
    case SyncMode::disabled: return "disabled";
    case SyncMode::prior: return "prior";
    case SyncMode::posterior: return "posterior";
  }
  return "?";
}

SyncParams SyncParams::init(std::size_t state_dim, std::size_t d_sync, std::size_t n_heads,
                            std::size_t n_layers, Rng& rng) {
  if (n_heads == 0 || d_sync % n_heads != 0) {
    throw Error("sync: d_sync must be divisible by n_heads");
  }
  SyncParams p;
  p.state_dim = state_dim;
  p.d_sync = d_sync;
  p.n_heads = n_heads;
  const double s_in = 1.0 / std::sqrt(double(state_dim));
  const double s_d = 1.0 / std::sqrt(double(d_sync));
  const std::size_t d_ff = 4 * d_sync;
  p.w_down = normal_parameter({state_dim, d_sync}, s_in, rng);
  for (std::size_t l = 0; l < n_layers; ++l) {
    SyncLayer L;
    L.ln1_gain = constant_parameter({d_sync}, 1.0);
    L.ln1_bias = constant_parameter({d_sync}, 0.0);
    L.w_q = normal_parameter({d_sync, d_sync}, s_d, rng);
    L.w_k = normal_parameter({d_sync, d_sync}, s_d, rng);
    L.w_v = normal_parameter({d_sync, d_sync}, s_d, rng);
    L.w_o = normal_parameter({d_sync, d_sync}, s_d, rng);
    L.ln2_gain = constant_parameter({d_sync}, 1.0);
    L.ln2_bias = constant_parameter({d_sync}, 0.0);
    L.w_ff1 = normal_parameter({d_sync, d_ff}, s_d, rng);
    L.b_ff1 = constant_parameter({d_ff}, 0.0);
    L.w_ff2 = normal_parameter({d_ff, d_sync}, 1.0 / std::sqrt(double(d_ff)), rng);
    L.b_ff2 = constant_parameter({d_sync}, 0.0);
    p.layers.push_back(std::move(L));
  }
  p.w_up = constant_parameter({d_sync, state_dim}, 0.0);
  return p;
}

void SyncParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "w_down", w_down);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = prefix + "layers." + std::to_string(l) + ".";
    SyncLayer& L = layers[l];
    fn(p + "ln1_gain", L.ln1_gain);
    fn(p + "ln1_bias", L.ln1_bias);
    fn(p + "w_q", L.w_q);
    fn(p + "w_k", L.w_k);
    fn(p + "w_v", L.w_v);
    fn(p + "w_o", L.w_o);
    fn(p + "ln2_gain", L.ln2_gain);
    fn(p + "ln2_bias", L.ln2_bias);
    fn(p + "w_ff1", L.w_ff1);
    fn(p + "b_ff1", L.b_ff1);
    fn(p + "w_ff2", L.w_ff2);
    fn(p + "b_ff2", L.b_ff2);
  }
  fn(prefix + "w_up", w_up);
}

namespace {

Tensor self_attention(const SyncLayer& L, const Tensor& x, std::size_t n_heads) {
  const std::size_t d = x.dim(1);
  const std::size_t dh = d / n_heads;
  const Tensor q = matmul(x, L.w_q);
  const Tensor k = matmul(x, L.w_k);
  const Tensor v = matmul(x, L.w_v);
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
    heads.push_back(matmul(attn, vh));
  }
  return matmul(concat_cols(heads), L.w_o);
}

}  // namespace

Tensor synchronize(const SyncParams& p, const Tensor& h) {
  if (h.rank() != 2 || h.dim(1) != p.state_dim) {
    throw ShapeError("synchronize: expected [k x " + std::to_string(p.state_dim) + "], got " +
                     samba::to_string(h.shape()));
  }
  Tensor tok = matmul(h, p.w_down);
  for (const SyncLayer& L : p.layers) {
    tok = add(tok, self_attention(L, layer_norm(tok, L.ln1_gain, L.ln1_bias), p.n_heads));
    const Tensor f = layer_norm(tok, L.ln2_gain, L.ln2_bias);
    const Tensor hidden = silu(add_row(matmul(f, L.w_ff1), L.b_ff1));
    tok = add(tok, add_row(matmul(hidden, L.w_ff2), L.b_ff2));
  }
  return add(h, matmul(tok, p.w_up));
}

std::vector<Tensor> synchronize(const SyncParams& p, const std::vector<Tensor>& states) {
  if (states.empty()) return {};
  const Shape shape = states.front().shape();
  std::vector<Tensor> flat;
  flat.reserve(states.size());
  for (const Tensor& s : states) {
    if (s.shape() != shape) {
      throw ShapeError("synchronize: heterogeneous hidden-state shapes " + samba::to_string(shape) +
                       " vs " + samba::to_string(s.shape()));
    }
    flat.push_back(s.rank() == 1 ? s : reshape(s, {s.numel()}));
  }
  const Tensor out = synchronize(p, stack_rows(flat, shape.empty() ? 1 : numel(shape)));
  std::vector<Tensor> result;
  result.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Tensor r = row(out, i);
    result.push_back(shape.size() == 1 ? r : reshape(r, shape));
  }
  return result;
}

}  // namespace samba::sync
