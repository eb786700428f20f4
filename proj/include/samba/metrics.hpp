#pragma once

// Identity-focused tracking metrics over a synthetic scene. Predictions are
// matched to visible ground truth per frame by center distance; only active
// track records take part.

#include <vector>

#include "samba/propagation.hpp"
#include "samba/simulator.hpp"

namespace samba::metrics {

struct Metrics {
  // Fraction of GT objects whose most frequent matched track id covers at
  // least 80% of their visible frames.
  double id_consistency = 0.0;
  // Number of changes of matched track id along each GT trajectory, summed.
  std::size_t id_switches = 0;
  // Mean over matches of TPA / (TPA + FNA + FPA).
  double assoc_accuracy = 0.0;
  std::size_t matches = 0;
};

inline constexpr double kConsistencyCoverage = 0.8;

// Center-distance gate for a frame: half the mean visible box size.
double match_threshold(const sim::Frame& frame);

// Greedy one-to-one matching by ascending center distance below the gate.
// Returns (gt index into frame.objects, record index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> match_frame(
    const sim::Frame& frame, const std::vector<propagation::TrackRecord>& records);

// records[t] holds the tracker output for frame t.
Metrics evaluate(const std::vector<std::vector<propagation::TrackRecord>>& records,
                 const sim::SyntheticScene& scene);

}  // namespace samba::metrics
