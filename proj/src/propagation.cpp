#include "samba/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "samba/ops.hpp"

namespace samba {

void validate(const Box& box) {
  if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || !std::isfinite(box.w) ||
      !std::isfinite(box.h)) {
    throw Error("box: non-finite coordinate");
  }
  if (box.w < 0 || box.h < 0) throw Error("box: negative size");
}

}  // namespace samba

namespace samba::propagation {

ResidualUpdate parse_residual_update(std::string_view name) {
  if (name == "residual") return ResidualUpdate::residual;
  if (name == "direct") return ResidualUpdate::direct;
  throw Error("unknown residual_update '" + std::string(name) + "' (expected residual|direct)");
}

OcclusionStrategy parse_occlusion_strategy(std::string_view name) {
  if (name == "maskobs") return OcclusionStrategy::maskobs;
  if (name == "freeze") return OcclusionStrategy::freeze;
  throw Error("unknown occlusion_strategy '" + std::string(name) + "' (expected maskobs|freeze)");
}

std::string_view to_string(ResidualUpdate v) {
  return v == ResidualUpdate::residual ? "residual" : "direct";
}

std::string_view to_string(OcclusionStrategy v) {
  return v == OcclusionStrategy::maskobs ? "maskobs" : "freeze";
}

std::string_view to_string(TrackStatus s) { return s == TrackStatus::active ? "active" : "inactive"; }

std::size_t n_miss_preset(std::string_view dataset) {
  if (dataset == "dancetrack") return 35;
  if (dataset == "bft") return 20;
  if (dataset == "sportsmot") return 50;
  throw Error("unknown N_miss preset '" + std::string(dataset) + "'");
}

PropagationParams PropagationParams::init(const model::ModelConfig& cfg, Rng& rng) {
  PropagationParams p;
  p.samba = model::UnitParams::init(cfg, rng);
  p.w_sy = constant_parameter({cfg.d_model, cfg.d_model}, 0.0);
  p.b_sy = constant_parameter({cfg.d_model}, 0.0);
  return p;
}

void PropagationParams::visit(const ParamVisitor& fn) {
  samba.visit("samba.", fn);
  fn("s_y.weight", w_sy);
  fn("s_y.bias", b_sy);
}

Tensor positional_encoding(const Box& box, std::size_t d) {
  if (d == 0 || d % 8 != 0) {
    throw Error("positional_encoding: D must be a positive multiple of 8, got " + std::to_string(d));
  }
  validate(box);
  const std::size_t f = d / 8;
  const double coords[4] = {box.cx, box.cy, box.w, box.h};
  std::vector<double> pe(d);
  for (std::size_t c = 0; c < 4; ++c) {
    double* sec = pe.data() + c * 2 * f;
    for (std::size_t j = 0; j < f; ++j) {
      const double omega =
          2.0 * std::numbers::pi * std::pow(10000.0, -8.0 * double(j) / double(d));
      sec[j] = std::sin(omega * coords[c]);
      sec[f + j] = std::cos(omega * coords[c]);
    }
  }
  return Tensor::from({d}, std::move(pe));
}

Tensor encode_observation(const Tensor& emb, const Box& box, bool use_pe) {
  if (emb.rank() != 1) throw ShapeError("encode_observation: embedding must be rank 1");
  if (!use_pe) return emb;
  return add(emb, positional_encoding(box, emb.dim(0)));
}

void propagate_queries(const PropagationParams& params, const TrackerConfig& cfg,
                       std::vector<Track>& tracks, const std::vector<Observation>& observations) {
  if (observations.size() != tracks.size()) {
    throw ShapeError("propagate_queries: " + std::to_string(observations.size()) +
                     " observations for " + std::to_string(tracks.size()) + " tracks");
  }
  const std::size_t d = params.d_model();
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const bool frozen = cfg.occlusion_strategy == OcclusionStrategy::freeze &&
                        !(observations[i].conf > cfg.tau_track);
    if (!frozen) live.push_back(i);
  }
  if (live.empty()) return;

  std::vector<Tensor> xs;
  std::vector<double> conf;
  std::vector<model::SambaState> states;
  for (std::size_t i : live) {
    const Observation& o = observations[i];
    if (o.emb.rank() != 1 || o.emb.dim(0) != d) {
      throw ShapeError("propagate_queries: observation embedding must have length " + std::to_string(d));
    }
    xs.push_back(encode_observation(o.emb, o.box, cfg.use_pe));
    conf.push_back(o.conf);
    states.push_back(std::move(tracks[i].state));
  }
  const Tensor y = model::set_step(params.samba, states, stack_rows(xs, d), conf, cfg.tau_mask);
  const Tensor dq = add_row(matmul(y, params.w_sy), params.b_sy);
  for (std::size_t j = 0; j < live.size(); ++j) {
    Track& t = tracks[live[j]];
    t.state = std::move(states[j]);
    t.q = cfg.residual_update == ResidualUpdate::residual ? add(t.q, row(dq, j)) : row(dq, j);
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      const TrackerConfig& cfg) {
  struct Candidate {
    double sim;
    std::size_t track, det;
  };
  std::vector<Tensor> encoded;
  encoded.reserve(detections.size());
  for (const Detection& det : detections) {
    const Tensor emb = Tensor::from({det.emb.size()}, det.emb);
    encoded.push_back(encode_observation(emb, det.box, cfg.use_pe));
  }
  std::vector<Candidate> cands;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double s = cosine_similarity(tracks[t].q.data(), encoded[j].data());
      if (s > cfg.tau_assoc) cands.push_back({s, t, j});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.sim > b.sim; });
  std::vector<bool> track_used(tracks.size(), false), det_used(detections.size(), false);
  Association out;
  for (const Candidate& c : cands) {
    if (track_used[c.track] || det_used[c.det]) continue;
    track_used[c.track] = det_used[c.det] = true;
    out.matches.emplace_back(c.track, c.det);
  }
  std::sort(out.matches.begin(), out.matches.end());
  for (std::size_t j = 0; j < detections.size(); ++j)
    if (!det_used[j] && detections[j].conf > cfg.tau_det) out.newborn.push_back(j);
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (!track_used[t]) out.unmatched_tracks.push_back(t);
  return out;
}

std::vector<std::uint64_t> lifecycle_update(std::vector<Track>& tracks,
                                            std::span<const double> conf,
                                            const TrackerConfig& cfg) {
  if (conf.size() != tracks.size()) throw ShapeError("lifecycle_update: conf misaligned");
  std::vector<std::uint64_t> dropped;
  std::vector<Track> kept;
  kept.reserve(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    Track& t = tracks[i];
    if (conf[i] > cfg.tau_track) {
      t.status = TrackStatus::active;
      t.miss_count = 0;
    } else {
      t.status = TrackStatus::inactive;
      ++t.miss_count;
    }
    if (t.miss_count > cfg.n_miss) {
      dropped.push_back(t.id);
    } else {
      kept.push_back(std::move(t));
    }
  }
  tracks = std::move(kept);
  return dropped;
}

Tracker::Tracker(const PropagationParams& params, TrackerConfig cfg)
    : params_(params), cfg_(cfg) {}

std::vector<TrackRecord> Tracker::step(std::size_t frame, const std::vector<Detection>& detections) {
  NoGradGuard no_grad;
  const std::size_t d = params_.d_model();
  for (const Detection& det : detections) {
    if (det.emb.size() != d) throw ShapeError("tracker: detection embedding length differs from D");
  }
  const Association assoc = associate(tracks_, detections, cfg_);

  std::vector<Observation> obs(tracks_.size());
  for (std::size_t t : assoc.unmatched_tracks) obs[t] = {tracks_[t].q, tracks_[t].last_box, 0.0};
  for (const auto& [t, j] : assoc.matches) {
    const Detection& det = detections[j];
    obs[t] = {Tensor::from({d}, det.emb), det.box, det.conf};
  }
  for (std::size_t j : assoc.newborn) {
    const Detection& det = detections[j];
    Track nt;
    nt.id = next_id_++;
    const Tensor emb = Tensor::from({d}, det.emb);
    nt.q = encode_observation(emb, det.box, cfg_.use_pe);
    nt.state = model::SambaState::newborn(params_.samba.config);
    nt.last_box = det.box;
    tracks_.push_back(std::move(nt));
    obs.push_back({emb, det.box, det.conf});
  }

  propagate_queries(params_, cfg_, tracks_, obs);

  std::vector<double> conf(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    conf[i] = obs[i].conf;
    if (conf[i] > cfg_.tau_track) tracks_[i].last_box = obs[i].box;
  }
  // Keep the confidence alongside each surviving track for the records.
  std::vector<std::pair<std::uint64_t, double>> conf_by_id;
  for (std::size_t i = 0; i < tracks_.size(); ++i) conf_by_id.emplace_back(tracks_[i].id, conf[i]);
  lifecycle_update(tracks_, conf, cfg_);

  std::vector<TrackRecord> records;
  records.reserve(tracks_.size());
  std::size_t k = 0;
  for (const Track& t : tracks_) {
    while (conf_by_id[k].first != t.id) ++k;
    records.push_back({frame, t.id, t.last_box, conf_by_id[k].second, t.status});
  }
  return records;
}

}  // namespace samba::propagation
