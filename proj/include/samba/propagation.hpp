#pragma once

// Track-query propagation: observations (embedding + positional encoding of
// the box) go through the Samba set step, and a learned map s_y turns the
// outputs into query updates. Also the track lifecycle and a similarity-based
// association stage that turns detections into per-track observations.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "samba/detection.hpp"
#include "samba/model.hpp"
#include "samba/tensor.hpp"

namespace samba::propagation {

enum class ResidualUpdate { residual, direct };
enum class OcclusionStrategy { maskobs, freeze };

ResidualUpdate parse_residual_update(std::string_view name);
OcclusionStrategy parse_occlusion_strategy(std::string_view name);
std::string_view to_string(ResidualUpdate v);
std::string_view to_string(OcclusionStrategy v);

struct TrackerConfig {
  double tau_det = 0.5;
  double tau_track = 0.5;
  double tau_mask = 0.5;
  double tau_assoc = 0.3;
  std::size_t n_miss = 35;
  bool use_pe = true;
  ResidualUpdate residual_update = ResidualUpdate::residual;
  OcclusionStrategy occlusion_strategy = OcclusionStrategy::maskobs;
};

// Drop horizons tuned per dataset: "dancetrack" 35, "bft" 20, "sportsmot" 50.
std::size_t n_miss_preset(std::string_view dataset);

struct PropagationParams {
  model::UnitParams samba;
  Tensor w_sy;  // [D x D], zero at init
  Tensor b_sy;  // [D], zero at init

  static PropagationParams init(const model::ModelConfig& cfg, Rng& rng);
  void visit(const ParamVisitor& fn);
  std::size_t d_model() const { return samba.config.d_model; }
};

// Sine/cosine encoding of (cx, cy, w, h), D/8 frequencies 2*pi*10000^(-8j/D)
// per coordinate: [sin..., cos...] for cx, then cy, w, h.
Tensor positional_encoding(const Box& box, std::size_t d);

// emb + PE(box), or emb unchanged when use_pe is false.
Tensor encode_observation(const Tensor& emb, const Box& box, bool use_pe = true);

enum class TrackStatus { active, inactive };
std::string_view to_string(TrackStatus s);

struct Track {
  std::uint64_t id = 0;
  Tensor q;  // [D]
  model::SambaState state;
  TrackStatus status = TrackStatus::active;
  std::size_t miss_count = 0;
  Box last_box;
};

struct Observation {
  Tensor emb;  // [D]
  Box box;
  double conf = 0.0;
};

// Updates queries and states in place. Under the freeze strategy, tracks with
// conf <= tau_track are left untouched and excluded from the set step.
void propagate_queries(const PropagationParams& params, const TrackerConfig& cfg,
                       std::vector<Track>& tracks, const std::vector<Observation>& observations);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> newborn;                          // detection indices
  std::vector<std::size_t> unmatched_tracks;
};

// Greedy one-to-one matching by descending cosine similarity between track
// queries and encoded detections, keeping pairs above tau_assoc.
Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      const TrackerConfig& cfg);

// conf > tau_track: active, miss count reset; otherwise inactive and one more
// miss. Tracks with more than n_miss misses are removed; their ids are returned.
std::vector<std::uint64_t> lifecycle_update(std::vector<Track>& tracks,
                                            std::span<const double> conf,
                                            const TrackerConfig& cfg);

struct TrackRecord {
  std::size_t frame = 0;
  std::uint64_t id = 0;
  Box box;
  double conf = 0.0;
  TrackStatus status = TrackStatus::active;
};

// Online tracker for one scene.
class Tracker {
 public:
  Tracker(const PropagationParams& params, TrackerConfig cfg);

  std::vector<TrackRecord> step(std::size_t frame, const std::vector<Detection>& detections);
  const std::vector<Track>& tracks() const { return tracks_; }

 private:
  const PropagationParams& params_;
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 0;
};

}  // namespace samba::propagation
