#include "samba/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "samba/init.hpp"
#include "samba/model.hpp"
#include "samba/ops.hpp"
#include "samba/propagation.hpp"
#include "samba/simulator.hpp"
#include "samba/ssm.hpp"
#include "samba/sync.hpp"
#include "samba/trainer.hpp"

namespace samba::gradcheck {

bool Report::ok() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupResult& g) { return g.pass; });
}

std::vector<std::string> Report::failures() const {
  std::vector<std::string> out;
  for (const GroupResult& g : groups)
    if (!g.pass) out.push_back(g.group);
  return out;
}

std::string Report::csv() const {
  std::ostringstream out;
  out << "group,elements,max_rel_error,pass\n";
  out.precision(6);
  for (const GroupResult& g : groups) {
    out << g.group << ',' << g.elements << ',' << std::scientific << g.max_rel_error << ','
        << (g.pass ? "true" : "false") << '\n';
  }
  return out.str();
}

void Report::merge(const GroupResult& r) {
  for (GroupResult& g : groups) {
    if (g.group != r.group) continue;
    if (r.max_rel_error > g.max_rel_error) {
      g.max_rel_error = r.max_rel_error;
      g.worst_index = r.worst_index;
      g.worst_analytic = r.worst_analytic;
      g.worst_numeric = r.worst_numeric;
    }
    g.elements = std::max(g.elements, r.elements);
    g.pass = g.pass && r.pass;
    return;
  }
  groups.push_back(r);
}

GroupResult check(const std::string& group, const std::function<Tensor()>& loss, Tensor& theta, double tol) {
  theta.zero_grad();
  backward(loss());
  std::vector<double> analytic(theta.numel(), 0.0);
  if (theta.has_grad()) std::copy(theta.grad().begin(), theta.grad().end(), analytic.begin());
  const Tensor numeric = finite_diff(
      [&] {
        NoGradGuard no_grad;
        return loss().item();
      },
      theta, kStep);
  GroupResult r;
  r.group = group;
  r.elements = theta.numel();
  r.max_rel_error = max_relative_error(analytic, numeric.data());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double e = max_relative_error(std::span(analytic).subspan(i, 1), numeric.data().subspan(i, 1));
    if (e == r.max_rel_error) {
      r.worst_index = i;
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric.at(i);
      break;
    }
  }
  r.pass = r.max_rel_error < tol;
  theta.zero_grad();
  return r;
}

namespace {

Tensor rand_leaf(Shape shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

// Random fixed weights so that the scalar loss does not hide symmetric errors.
Tensor weights_like(const Tensor& x, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(x.numel());
  for (double& w : v) w = u(rng);
  return Tensor::from(x.shape(), std::move(v));
}

Tensor weighted(const Tensor& x, const Tensor& w) { return sum(mul(x, w)); }

void randomize(Tensor& t, Rng& rng, double stddev) {
  std::normal_distribution<double> g(0.0, stddev);
  for (double& x : t.mutable_data()) x = g(rng);
}

// Moves a freshly initialized block away from its near-silent start (small
// step sizes, zero sync write-back, nearly uniform attention), where most
// gradients are too small to compare against finite differences.
void liven(ssm::SelectiveSsmParams& p, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 0.0);
  for (double& x : p.delta_bias.mutable_data()) x = u(rng);
}

void liven(sync::SyncParams& p, Rng& rng) {
  randomize(p.w_up, rng, 0.3);
  randomize(p.w_down, rng, 0.5);
  for (sync::SyncLayer& l : p.layers) {
    randomize(l.w_q, rng, 0.7);
    randomize(l.w_k, rng, 0.7);
  }
}

void liven(model::UnitParams& p, Rng& rng) {
  for (model::BlockParams& b : p.blocks) {
    liven(b.ssm, rng);
    liven(b.sync, rng);
  }
}

bool selected(const Options& opts, const std::string& family) {
  return opts.only.empty() ||
         std::find(opts.only.begin(), opts.only.end(), family) != opts.only.end();
}

// One elementwise or structural op, checked against each listed input.
void op_group(Report& rep, const std::string& name, std::vector<Tensor> inputs,
              const std::function<Tensor(const std::vector<Tensor>&)>& f, Rng& rng) {
  const Tensor w = weights_like(f(inputs), rng);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    rep.merge(check("ops/" + name + "/" + std::to_string(i), [&] { return weighted(f(inputs), w); },
                    inputs[i]));
  }
}

void ops_groups(Report& rep, Rng& rng) {
  auto L = [&](Shape s, double lo = -1.0, double hi = 1.0) { return rand_leaf(std::move(s), rng, lo, hi); };
  using V = std::vector<Tensor>;
  op_group(rep, "matmul", {L({3, 4}), L({4, 2})}, [](const V& x) { return matmul(x[0], x[1]); }, rng);
  op_group(rep, "transpose", {L({3, 4})}, [](const V& x) { return transpose(x[0]); }, rng);
  op_group(rep, "add", {L({3, 4}), L({3, 4})}, [](const V& x) { return add(x[0], x[1]); }, rng);
  op_group(rep, "sub", {L({3, 4}), L({3, 4})}, [](const V& x) { return sub(x[0], x[1]); }, rng);
  op_group(rep, "mul", {L({3, 4}), L({3, 4})}, [](const V& x) { return mul(x[0], x[1]); }, rng);
  op_group(rep, "scale", {L({3, 4})}, [](const V& x) { return scale(x[0], -1.7); }, rng);
  op_group(rep, "add_row", {L({3, 4}), L({4})}, [](const V& x) { return add_row(x[0], x[1]); }, rng);
  op_group(rep, "mul_row", {L({3, 4}), L({4})}, [](const V& x) { return mul_row(x[0], x[1]); }, rng);
  op_group(rep, "sum", {L({3, 4})}, [](const V& x) { const Tensor s = sum(x[0]); return mul(s, s); }, rng);
  op_group(rep, "mean", {L({3, 4})}, [](const V& x) { const Tensor s = mean(x[0]); return mul(s, s); }, rng);
  op_group(rep, "softplus", {L({3, 4}, -6.0, 6.0)}, [](const V& x) { return softplus(x[0]); }, rng);
  op_group(rep, "silu", {L({3, 4}, -4.0, 4.0)}, [](const V& x) { return silu(x[0]); }, rng);
  op_group(rep, "softmax_rows", {L({3, 4}, -2.0, 2.0)}, [](const V& x) { return softmax(x[0], -1); }, rng);
  op_group(rep, "softmax_cols", {L({3, 4}, -2.0, 2.0)}, [](const V& x) { return softmax(x[0], 0); }, rng);
  op_group(rep, "layer_norm", {L({3, 5}), L({5}, 0.5, 1.5), L({5})},
           [](const V& x) { return layer_norm(x[0], x[1], x[2]); }, rng);
  op_group(rep, "layer_norm_vec", {L({6}), L({6}, 0.5, 1.5), L({6})},
           [](const V& x) { return layer_norm(x[0], x[1], x[2]); }, rng);
  op_group(rep, "slice_cols", {L({3, 5})}, [](const V& x) { return slice_cols(x[0], 1, 4); }, rng);
  op_group(rep, "concat_cols", {L({3, 2}), L({3, 3})}, [](const V& x) { return concat_cols(x); }, rng);
  op_group(rep, "reshape", {L({3, 4})}, [](const V& x) { return reshape(x[0], {2, 6}); }, rng);
  op_group(rep, "stack_rows", {L({4}), L({4}), L({4})}, [](const V& x) { return stack_rows(x, 4); }, rng);
  op_group(rep, "row", {L({3, 4})}, [](const V& x) { return row(x[0], 1); }, rng);
  op_group(rep, "gather_row", {L({3, 4}), L({3, 4})}, [](const V& x) { return gather_row(x, 2, 4); }, rng);
  op_group(rep, "shift_in", {L({3, 4}), L({4})}, [](const V& x) { return shift_in(x[0], x[1]); }, rng);
  op_group(rep, "causal_conv1d", {L({5, 3}), L({3, 3}), L({2, 3})},
           [](const V& x) { return causal_conv1d(x[0], x[1], x[2]); }, rng);
  op_group(rep, "conv_step", {L({2, 3}), L({2, 3}), L({2, 3}), L({3, 3})},
           [](const V& x) { return conv_step(x[0], {x[1], x[2]}, x[3]); }, rng);
  op_group(rep, "zoh_decay", {L({2, 3}, 0.05, 1.0), L({3, 2})},
           [](const V& x) { return zoh_decay(x[0], x[1]); }, rng);
  op_group(rep, "zoh_input_gain", {L({2, 3}, 0.05, 1.0), L({3, 2})},
           [](const V& x) { return zoh_input_gain(x[0], x[1]); }, rng);
  op_group(rep, "ltmu_update", {L({2, 6}), L({2, 6}), L({2, 2}), L({2, 3})},
           [](const V& x) { return ltmu_update(x[0], x[1], x[2], x[3], {true, false}); }, rng);
  op_group(rep, "state_readout", {L({2, 6}), L({2, 2})},
           [](const V& x) { return state_readout(x[0], x[1]); }, rng);
}

void ssm_groups(Report& rep, Rng& rng) {
  ssm::SelectiveSsmParams p = ssm::SelectiveSsmParams::init(3, 2, 1, rng);
  liven(p, rng);
  Tensor xs = rand_leaf({4, 3}, rng, -1.0, 1.0);
  const std::vector<bool> observe{true, false, true, true};
  const ssm::ScanResult base = ssm::scan(p, xs, observe);
  const Tensor wy = weights_like(base.ys, rng), wh = weights_like(base.h_final, rng);
  auto loss = [&] {
    const ssm::ScanResult r = ssm::scan(p, xs, observe);
    return add(weighted(r.ys, wy), weighted(r.h_final, wh));
  };
  p.visit("ssm/", [&](const std::string& name, Tensor& t) { rep.merge(check(name, loss, t)); });
  rep.merge(check("ssm/inputs", loss, xs));
}

void sync_groups(Report& rep, Rng& rng) {
  sync::SyncParams p = sync::SyncParams::init(6, 4, 2, 2, rng);
  liven(p, rng);
  Tensor h = rand_leaf({3, 6}, rng, -1.0, 1.0);
  const Tensor w = weights_like(sync::synchronize(p, h), rng);
  auto loss = [&] { return weighted(sync::synchronize(p, h), w); };
  p.visit("sync/", [&](const std::string& name, Tensor& t) { rep.merge(check(name, loss, t)); });
  rep.merge(check("sync/states", loss, h));
}

model::ModelConfig tiny_model(sync::SyncMode mode) {
  model::ModelConfig cfg;
  cfg.d_model = 8;
  cfg.expand = 1;
  cfg.d_state = 2;
  cfg.d_conv = 3;
  cfg.n_blocks = 2;
  cfg.n_sync = 1;
  cfg.d_sync = 4;
  cfg.n_heads = 2;
  cfg.sync_mode = mode;
  return cfg;
}

void unit_groups(Report& rep, Rng& rng, sync::SyncMode mode) {
  const model::ModelConfig cfg = tiny_model(mode);
  model::UnitParams p = model::UnitParams::init(cfg, rng);
  liven(p, rng);
  const std::size_t k = 2, steps = 3;
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(rand_leaf({k, cfg.d_model}, rng, -1.0, 1.0));
  const std::vector<std::vector<double>> conf{{0.9, 0.2}, {0.3, 0.8}, {0.7, 0.6}};
  // Random starting states: from all-zero states the first synchronization
  // normalizes near-constant tokens, where LayerNorm is too curved for a
  // 1e-5 central difference.
  std::vector<model::SambaState> start(k, model::SambaState::newborn(cfg));
  for (model::SambaState& s : start) {
    for (model::BlockState& b : s.blocks) {
      b.h = rand_leaf(b.h.shape(), rng, -1.0, 1.0).detach();
      b.conv_buffer = rand_leaf(b.conv_buffer.shape(), rng, -1.0, 1.0).detach();
    }
  }
  auto run = [&] {
    std::vector<model::SambaState> states = start;
    return model::rollout(p, states, xs, conf, 0.5);
  };
  std::vector<Tensor> w;
  for (const Tensor& y : run()) w.push_back(weights_like(y, rng));
  auto loss = [&] {
    const std::vector<Tensor> ys = run();
    Tensor total = weighted(ys[0], w[0]);
    for (std::size_t t = 1; t < ys.size(); ++t) total = add(total, weighted(ys[t], w[t]));
    return total;
  };
  const std::string prefix = "unit." + std::string(sync::to_string(mode)) + "/";
  p.visit(prefix, [&](const std::string& name, Tensor& t) { rep.merge(check(name, loss, t)); });
  rep.merge(check(prefix + "inputs", loss, xs[0]));
}

void train_step_groups(Report& rep, Rng& rng, std::uint64_t seed) {
  const model::ModelConfig cfg = tiny_model(sync::SyncMode::posterior);
  propagation::PropagationParams p = propagation::PropagationParams::init(cfg, rng);
  randomize(p.w_sy, rng, 0.3);
  randomize(p.b_sy, rng, 0.1);
  liven(p.samba, rng);

  sim::SceneConfig sc;
  sc.n_groups = 2;
  sc.members_per_group = 2;
  sc.frames = 12;
  sc.emb_dim = cfg.d_model;
  sc.occlusion_rate = 0.2;
  sc.occlusion_len = {2, 4};
  sc.seed = seed;
  const sim::SyntheticScene scene = sim::generate_scene(sc);

  train::TrainConfig tc;
  tc.clip_len = 5;
  tc.grad_frames = 5;  // fully unrolled: every frame on the tape
  tc.frame_interval_range = {1, 2};
  Rng clip_rng(seed);
  const std::vector<std::size_t> clip = train::sample_clip(scene.frames.size(), tc, clip_rng);
  const propagation::TrackerConfig tracker;
  train::StepOptions opts;
  opts.run_backward = false;
  auto loss = [&] { return train::train_step(p, scene, clip, tracker, tc, opts).loss_node; };
  p.visit([&](const std::string& name, Tensor& t) { rep.merge(check("train_step/" + name, loss, t)); });
}

void fixture_group(Report& rep, Rng& rng) {
  Tensor x = rand_leaf({3, 3}, rng, -1.0, 1.0);
  const Tensor w = weights_like(x, rng);
  auto loss = [&] {
    return weighted(unary_map(x, [](double v) { return std::sin(v); },
                              [](double v) { return 1.1 * std::cos(v); }),
                    w);
  };
  rep.merge(check("fixture/corrupted_unary", loss, x));
}

}  // namespace

Report run_all(const Options& opts) {
  Report rep;
  for (std::uint64_t seed : opts.seeds) {
    Rng rng(seed);
    if (selected(opts, "ops")) ops_groups(rep, rng);
    if (selected(opts, "ssm")) ssm_groups(rep, rng);
    if (selected(opts, "sync")) sync_groups(rep, rng);
    if (selected(opts, "unit")) {
      unit_groups(rep, rng, sync::SyncMode::posterior);
      unit_groups(rep, rng, sync::SyncMode::prior);
      unit_groups(rep, rng, sync::SyncMode::disabled);
    }
    if (selected(opts, "train_step")) train_step_groups(rep, rng, seed);
    if (opts.corrupt_fixture) fixture_group(rep, rng);
  }
  return rep;
}

}  // namespace samba::gradcheck
