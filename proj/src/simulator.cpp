#include "samba/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "samba/tensor.hpp"

namespace samba::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Box clamp_box(Box b) {
  b.cx = clamp01(b.cx);
  b.cy = clamp01(b.cy);
  b.w = clamp01(b.w);
  b.h = clamp01(b.h);
  return b;
}

struct Sinusoid {
  double amp, freq, phase;
};

struct Axis {
  double base;
  std::vector<Sinusoid> terms;
  double at(std::size_t t) const {
    double v = base;
    for (const Sinusoid& s : terms) v += s.amp * std::sin(kTwoPi * s.freq * double(t) + s.phase);
    return v;
  }
};

}  // namespace

void SceneConfig::validate(double tau_mask, double tau_track) const {
  if (frames == 0) throw Error("scene config: frames must be >= 1");
  if (n_groups == 0 || members_per_group == 0) throw Error("scene config: no objects");
  if (emb_dim == 0) throw Error("scene config: emb_dim must be >= 1");
  if (conf_occluded_range.first > conf_occluded_range.second ||
      conf_visible_range.first > conf_visible_range.second) {
    throw Error("scene config: confidence ranges must be ordered");
  }
  if (conf_occluded_range.second > tau_mask || conf_occluded_range.first < 0.0) {
    throw Error("scene config: occluded confidences must lie in [0, tau_mask]");
  }
  if (!(conf_visible_range.first > tau_track) || conf_visible_range.second > 1.0) {
    throw Error("scene config: visible confidences must lie in (tau_track, 1]");
  }
  if (occlusion_rate < 0.0 || occlusion_rate > 1.0) throw Error("scene config: bad occlusion_rate");
  if (occlusion_len.first == 0 || occlusion_len.first > occlusion_len.second) {
    throw Error("scene config: occlusion_len must be an ordered range of positive lengths");
  }
  if (group_emb_share < 0.0 || group_emb_share > 1.0) throw Error("scene config: bad group_emb_share");
  if (emb_noise_sigma < 0 || box_noise_sigma < 0 || emb_drift < 0) {
    throw Error("scene config: noise levels must be non-negative");
  }
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](Range r) { return r.first + (r.second - r.first) * unit(rng); };

  const std::size_t n_obj = cfg.n_groups * cfg.members_per_group;
  const std::size_t d = cfg.emb_dim;

  // Group trajectories, kept inside the frame with the largest box.
  const double margin = cfg.group_amplitude.second + cfg.orbit_radius + cfg.box_size.second / 2;
  std::vector<std::array<Axis, 2>> groups(cfg.n_groups);
  for (auto& g : groups) {
    for (Axis& ax : g) {
      ax.base = margin < 0.5 ? margin + (1.0 - 2.0 * margin) * unit(rng) : 0.5;
      const std::size_t m = 2 + static_cast<std::size_t>(unit(rng) * 3.0) % 3;
      const double total = uniform(cfg.group_amplitude);
      std::vector<double> w(m);
      double wsum = 0.0;
      for (double& x : w) wsum += (x = 0.2 + unit(rng));
      for (std::size_t i = 0; i < m; ++i) {
        ax.terms.push_back({total * w[i] / wsum, uniform(cfg.group_frequency), kTwoPi * unit(rng)});
      }
    }
  }

  struct Object {
    std::size_t group;
    double dx, dy, w, h;
    std::vector<double> base, drift_phase, drift_period;
  };
  std::vector<std::vector<double>> group_emb(cfg.n_groups, std::vector<double>(d));
  for (auto& v : group_emb)
    for (double& x : v) x = gauss(rng);
  std::vector<Object> objects(n_obj);
  for (std::size_t i = 0; i < n_obj; ++i) {
    Object& o = objects[i];
    o.group = i / cfg.members_per_group;
    const std::size_t slot = i % cfg.members_per_group;
    const double angle = kTwoPi * (double(slot) + 0.25 * unit(rng)) / double(cfg.members_per_group);
    const double radius = cfg.members_per_group == 1 ? 0.0 : cfg.orbit_radius;
    o.dx = radius * std::cos(angle);
    o.dy = radius * std::sin(angle);
    o.w = uniform(cfg.box_size);
    o.h = uniform(cfg.box_size);
    o.base.resize(d);
    o.drift_phase.resize(d);
    o.drift_period.resize(d);
    const double shared = std::sqrt(cfg.group_emb_share), own = std::sqrt(1.0 - cfg.group_emb_share);
    for (std::size_t j = 0; j < d; ++j) {
      o.base[j] = cfg.emb_scale * (shared * group_emb[o.group][j] + own * gauss(rng));
      o.drift_phase[j] = kTwoPi * unit(rng);
      o.drift_period[j] = 40.0 + 80.0 * unit(rng);
    }
  }

  SyntheticScene scene;
  scene.frames.resize(cfg.frames);
  std::vector<std::size_t> occluded_left(n_obj, 0);
  std::vector<Box> last_visible(n_obj);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    Frame& frame = scene.frames[t];
    for (std::size_t i = 0; i < n_obj; ++i) {
      const Object& o = objects[i];
      if (t > 0 && occluded_left[i] == 0 && unit(rng) < cfg.occlusion_rate) {
        const auto [lo, hi] = cfg.occlusion_len;
        occluded_left[i] = lo + static_cast<std::size_t>(unit(rng) * double(hi - lo + 1)) % (hi - lo + 1);
      }
      GroundTruth gt;
      gt.id = static_cast<std::int64_t>(i);
      gt.group = o.group;
      gt.box = clamp_box({groups[o.group][0].at(t) + o.dx, groups[o.group][1].at(t) + o.dy, o.w, o.h});
      gt.visible = occluded_left[i] == 0;
      if (occluded_left[i] > 0) --occluded_left[i];
      gt.emb_clean.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        gt.emb_clean[j] =
            o.base[j] + cfg.emb_drift * std::sin(kTwoPi * double(t) / o.drift_period[j] + o.drift_phase[j]);
      }
      if (gt.visible) last_visible[i] = gt.box;

      if (gt.visible || !cfg.drop_occluded) {
        Detection det;
        det.gt_id = gt.id;
        det.emb.resize(d);
        for (std::size_t j = 0; j < d; ++j) det.emb[j] = gt.emb_clean[j] + cfg.emb_noise_sigma * gauss(rng);
        const Box src = gt.visible ? gt.box : last_visible[i];
        det.box = clamp_box({src.cx + cfg.box_noise_sigma * gauss(rng),
                             src.cy + cfg.box_noise_sigma * gauss(rng),
                             src.w * (1.0 + cfg.box_noise_sigma * gauss(rng)),
                             src.h * (1.0 + cfg.box_noise_sigma * gauss(rng))});
        det.conf = uniform(gt.visible ? cfg.conf_visible_range : cfg.conf_occluded_range);
        frame.detections.push_back(std::move(det));
      }
      frame.objects.push_back(std::move(gt));
    }
    std::shuffle(frame.detections.begin(), frame.detections.end(), rng);
  }
  return scene;
}

}  // namespace samba::sim
