#include "samba/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "samba/ops.hpp"

namespace samba::train {

using propagation::Observation;
using propagation::Track;

void TrainConfig::validate() const {
  if (clip_len == 0) throw Error("train config: clip_len must be >= 1");
  if (grad_frames == 0 || grad_frames > clip_len) {
    throw Error("train config: grad_frames must lie in [1, clip_len]");
  }
  const auto [lo, hi] = frame_interval_range;
  if (lo == 0 || lo > hi) throw Error("train config: frame_interval_range must be an ordered positive range");
  if (!(lr > 0.0)) throw Error("train config: lr must be > 0");
  if (weight_decay < 0.0) throw Error("train config: weight_decay must be >= 0");
  if (adam_betas.first < 0 || adam_betas.first >= 1 || adam_betas.second < 0 || adam_betas.second >= 1) {
    throw Error("train config: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw Error("train config: adam_eps must be > 0");
  if (batch_scenes == 0 || train_scenes == 0) throw Error("train config: need at least one scene");
}

std::vector<std::size_t> sample_clip(std::size_t scene_len, const TrainConfig& cfg, Rng& rng) {
  const auto [lo, hi] = cfg.frame_interval_range;
  std::vector<std::size_t> admissible;
  for (std::size_t s = lo; s <= hi; ++s)
    if ((cfg.clip_len - 1) * s + 1 <= scene_len) admissible.push_back(s);
  if (admissible.empty()) {
    throw Error("sample_clip: scene of " + std::to_string(scene_len) + " frames is too short for a " +
                std::to_string(cfg.clip_len) + "-frame clip at interval " + std::to_string(lo));
  }
  const std::size_t s =
      admissible[std::uniform_int_distribution<std::size_t>(0, admissible.size() - 1)(rng)];
  const std::size_t last_start = scene_len - ((cfg.clip_len - 1) * s + 1);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, last_start)(rng);
  std::vector<std::size_t> clip(cfg.clip_len);
  for (std::size_t i = 0; i < cfg.clip_len; ++i) clip[i] = start + i * s;
  return clip;
}

namespace {

std::string describe(const std::vector<std::size_t>& clip) {
  std::ostringstream msg;
  msg << "on clip frames";
  for (std::size_t f : clip) msg << ' ' << f;
  return msg.str();
}

StepResult step_impl(propagation::PropagationParams& params, const sim::SyntheticScene& scene,
                     const std::vector<std::size_t>& clip, const propagation::TrackerConfig& tracker,
                     const TrainConfig& cfg, const StepOptions& opts) {
  const std::size_t d = params.d_model();
  const std::size_t prefix = clip.size() - std::min(cfg.grad_frames, clip.size());
  for (std::size_t f : clip)
    if (f >= scene.frames.size()) throw Error("train_step: clip frame out of range");
  if (opts.inputs) opts.inputs->assign(clip.size(), {});

  std::vector<Track> tracks;
  std::vector<std::int64_t> gt_of;
  std::vector<Tensor> frame_losses;
  StepResult result;

  for (std::size_t i = 0; i < clip.size(); ++i) {
    const bool tracked = i >= prefix;
    std::optional<NoGradGuard> no_grad;
    if (!tracked && !opts.tape_prefix) no_grad.emplace();
    if (i == prefix && opts.tape_prefix) {
      for (Track& t : tracks) {
        t.q = t.q.detach();
        t.state = t.state.detached();
      }
    }

    const sim::Frame& frame = scene.frames[clip[i]];
    std::map<std::int64_t, const Detection*> det_of;
    for (const Detection& det : frame.detections) det_of[det.gt_id] = &det;
    auto embed = [&](const Detection& det) {
      Tensor e = opts.inputs ? Tensor::parameter({d}, det.emb) : Tensor::from({d}, det.emb);
      if (opts.inputs) (*opts.inputs)[i].push_back(e);
      return e;
    };

    std::vector<Observation> obs;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      auto it = det_of.find(gt_of[t]);
      if (it == det_of.end()) {
        obs.push_back({tracks[t].q, tracks[t].last_box, 0.0});
      } else {
        obs.push_back({embed(*it->second), it->second->box, it->second->conf});
      }
    }
    for (const sim::GroundTruth& g : frame.objects) {
      if (!g.visible || std::find(gt_of.begin(), gt_of.end(), g.id) != gt_of.end()) continue;
      auto it = det_of.find(g.id);
      if (it == det_of.end()) continue;
      Track nt;
      nt.id = static_cast<std::uint64_t>(g.id);
      const Tensor emb = embed(*it->second);
      nt.q = propagation::encode_observation(emb, it->second->box, tracker.use_pe);
      nt.state = model::SambaState::newborn(params.samba.config);
      nt.last_box = it->second->box;
      tracks.push_back(std::move(nt));
      gt_of.push_back(g.id);
      obs.push_back({emb, it->second->box, it->second->conf});
    }

    propagation::propagate_queries(params, tracker, tracks, obs);
    for (std::size_t t = 0; t < tracks.size(); ++t)
      if (obs[t].conf > tracker.tau_track) tracks[t].last_box = obs[t].box;

    if (!tracked || i + 1 >= clip.size()) continue;
    const sim::Frame& next = scene.frames[clip[i + 1]];
    std::vector<Tensor> preds, targets;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      for (const sim::GroundTruth& g : next.objects) {
        if (g.id != gt_of[t] || !g.visible) continue;
        preds.push_back(tracks[t].q);
        targets.push_back(
            propagation::encode_observation(Tensor::from({d}, g.emb_clean), g.box, tracker.use_pe));
      }
    }
    if (preds.empty()) continue;
    const Tensor diff = sub(stack_rows(preds, d), stack_rows(targets, d));
    frame_losses.push_back(mean(mul(diff, diff)));
    result.supervised += preds.size();
  }

  if (frame_losses.empty()) return result;
  Tensor total = frame_losses[0];
  for (std::size_t i = 1; i < frame_losses.size(); ++i) total = add(total, frame_losses[i]);
  const Tensor loss = scale(total, 1.0 / double(frame_losses.size()));
  result.loss = loss.item();
  result.loss_node = loss;
  if (!std::isfinite(result.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << result.loss;
    throw NumericError(msg.str());
  }
  if (opts.run_backward && loss.requires_grad()) {
    backward(opts.loss_scale == 1.0 ? loss : scale(loss, opts.loss_scale));
  }
  return result;
}

}  // namespace

StepResult train_step(propagation::PropagationParams& params, const sim::SyntheticScene& scene,
                      const std::vector<std::size_t>& clip, const propagation::TrackerConfig& tracker,
                      const TrainConfig& cfg, const StepOptions& opts) {
  try {
    return step_impl(params, scene, clip, tracker, cfg, opts);
  } catch (const NumericError& e) {
    throw NumericError(std::string("train_step: ") + e.what() + " " + describe(clip));
  }
}

std::vector<Tensor*> parameter_list(propagation::PropagationParams& params) {
  std::vector<Tensor*> out;
  params.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm) {
  double sq = 0.0;
  for (Tensor* p : params)
    if (p->has_grad())
      for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* p : params)
      if (p->has_grad())
        for (double& g : p->node()->grad) g *= s;
  }
  return norm;
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.lr;
  for (std::size_t e : cfg.lr_drop_epochs)
    if (e <= epoch) lr /= 10.0;
  return lr;
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(const std::vector<Tensor*>& params, double lr) {
  if (m_.empty()) {
    for (Tensor* p : params) {
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw Error("AdamW: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::span<double> w = p.mutable_data();
    std::span<const double> g;
    if (p.has_grad()) g = p.grad();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      w[j] -= lr * wd_ * w[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::vector<sim::SyntheticScene> training_scenes(const sim::SceneConfig& scene, const TrainConfig& cfg) {
  std::vector<sim::SyntheticScene> out;
  for (std::size_t i = 0; i < cfg.train_scenes; ++i) {
    sim::SceneConfig sc = scene;
    sc.seed = scene.seed + i;
    out.push_back(sim::generate_scene(sc));
  }
  return out;
}

TrainResult train(propagation::PropagationParams& params, const std::vector<sim::SyntheticScene>& scenes,
                  const propagation::TrackerConfig& tracker, const TrainConfig& cfg,
                  const std::function<void(const LossPoint&)>& on_step) {
  cfg.validate();
  if (scenes.empty()) throw Error("train: no scenes");
  Rng rng(cfg.seed);
  const std::vector<Tensor*> plist = parameter_list(params);
  AdamW opt(cfg.adam_betas.first, cfg.adam_betas.second, cfg.adam_eps, cfg.weight_decay);
  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      zero_grads(plist);
      double loss = 0.0;
      for (std::size_t b = 0; b < cfg.batch_scenes; ++b) {
        const auto& scene =
            scenes[std::uniform_int_distribution<std::size_t>(0, scenes.size() - 1)(rng)];
        const std::vector<std::size_t> clip = sample_clip(scene.frames.size(), cfg, rng);
        StepOptions opts;
        opts.loss_scale = 1.0 / double(cfg.batch_scenes);
        loss += train_step(params, scene, clip, tracker, cfg, opts).loss / double(cfg.batch_scenes);
      }
      clip_grad_norm(plist, cfg.grad_clip_norm);
      opt.step(plist, lr);
      const LossPoint point{step, epoch, loss, lr};
      result.curve.push_back(point);
      if (on_step) on_step(point);
    }
  }
  return result;
}

double evaluate_loss(propagation::PropagationParams& params, const std::vector<sim::SyntheticScene>& scenes,
                     const std::vector<std::vector<std::size_t>>& clips,
                     const propagation::TrackerConfig& tracker, const TrainConfig& cfg) {
  if (scenes.size() != clips.size()) throw Error("evaluate_loss: one clip per scene expected");
  NoGradGuard no_grad;
  StepOptions opts;
  opts.run_backward = false;
  double total = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    total += train_step(params, scenes[i], clips[i], tracker, cfg, opts).loss;
  return scenes.empty() ? 0.0 : total / double(scenes.size());
}

}  // namespace samba::train
