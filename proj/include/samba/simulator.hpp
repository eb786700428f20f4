#pragma once

// Synthetic coordinated-motion scenes. Groups of objects follow smooth
// sinusoidal group trajectories with members at fixed offsets from the group
// center, so every member of a group moves by the same displacement each
// frame. Objects get occluded at random; a synthetic detector emits noisy
// boxes, embeddings and confidences.

#include <cstdint>
#include <utility>
#include <vector>

#include "samba/detection.hpp"

namespace samba::sim {

using Range = std::pair<double, double>;

struct SceneConfig {
  std::size_t n_groups = 2;
  std::size_t members_per_group = 4;
  std::size_t frames = 60;
  Range group_amplitude{0.08, 0.16};  // total sinusoid amplitude per axis
  Range group_frequency{0.01, 0.04};  // cycles per frame
  double orbit_radius = 0.08;
  Range box_size{0.04, 0.07};
  double occlusion_rate = 0.05;
  std::pair<std::size_t, std::size_t> occlusion_len{4, 12};
  bool drop_occluded = false;
  std::size_t emb_dim = 32;  // must equal the model width D
  double emb_scale = 1.0;
  double group_emb_share = 0.8;  // fraction of embedding variance shared in a group
  double emb_drift = 0.05;
  double emb_noise_sigma = 0.05;
  double box_noise_sigma = 0.003;
  Range conf_visible_range{0.7, 1.0};
  Range conf_occluded_range{0.05, 0.4};
  std::uint64_t seed = 0;

  // Throws samba::Error. Thresholds are the tracker's tau_mask / tau_track.
  void validate(double tau_mask = 0.5, double tau_track = 0.5) const;
};

struct GroundTruth {
  std::int64_t id = 0;
  std::size_t group = 0;
  Box box;
  bool visible = true;
  std::vector<double> emb_clean;
};

struct Frame {
  std::vector<GroundTruth> objects;    // ordered by id
  std::vector<Detection> detections;  // shuffled
};

struct SyntheticScene {
  std::vector<Frame> frames;
  std::size_t num_objects() const { return frames.empty() ? 0 : frames.front().objects.size(); }
};

SyntheticScene generate_scene(const SceneConfig& cfg);

}  // namespace samba::sim
