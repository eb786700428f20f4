#include "samba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace samba::metrics {

double match_threshold(const sim::Frame& frame) {
  double total = 0.0;
  std::size_t n = 0;
  for (const sim::GroundTruth& g : frame.objects) {
    if (!g.visible) continue;
    total += 0.5 * (g.box.w + g.box.h);
    ++n;
  }
  return n ? 0.5 * total / double(n) : 0.0;
}

std::vector<std::pair<std::size_t, std::size_t>> match_frame(
    const sim::Frame& frame, const std::vector<propagation::TrackRecord>& records) {
  struct Candidate {
    double dist;
    std::size_t gt, rec;
  };
  const double gate = match_threshold(frame);
  std::vector<Candidate> cands;
  for (std::size_t g = 0; g < frame.objects.size(); ++g) {
    const sim::GroundTruth& gt = frame.objects[g];
    if (!gt.visible) continue;
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (records[r].status != propagation::TrackStatus::active) continue;
      const double dist = std::hypot(records[r].box.cx - gt.box.cx, records[r].box.cy - gt.box.cy);
      if (dist < gate) cands.push_back({dist, g, r});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });
  std::vector<bool> gt_used(frame.objects.size(), false), rec_used(records.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const Candidate& c : cands) {
    if (gt_used[c.gt] || rec_used[c.rec]) continue;
    gt_used[c.gt] = rec_used[c.rec] = true;
    out.emplace_back(c.gt, c.rec);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Metrics evaluate(const std::vector<std::vector<propagation::TrackRecord>>& records,
                 const sim::SyntheticScene& scene) {
  if (records.size() != scene.frames.size()) {
    throw Error("evaluate: " + std::to_string(records.size()) + " output frames for a scene of " +
                std::to_string(scene.frames.size()));
  }
  using Id = std::int64_t;
  using Pid = std::uint64_t;
  std::map<Id, std::size_t> visible;          // gt -> visible frames
  std::map<Pid, std::size_t> predicted;       // track -> active records
  std::map<std::pair<Id, Pid>, std::size_t> tpa;
  std::map<Id, std::vector<Pid>> trajectory;  // matched ids in frame order
  std::vector<std::pair<Id, Pid>> matched;

  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    const sim::Frame& frame = scene.frames[t];
    for (const sim::GroundTruth& g : frame.objects)
      if (g.visible) ++visible[g.id];
    for (const propagation::TrackRecord& r : records[t])
      if (r.status == propagation::TrackStatus::active) ++predicted[r.id];
    for (const auto& [g, r] : match_frame(frame, records[t])) {
      const Id gid = frame.objects[g].id;
      const Pid pid = records[t][r].id;
      ++tpa[{gid, pid}];
      trajectory[gid].push_back(pid);
      matched.emplace_back(gid, pid);
    }
  }

  Metrics m;
  std::size_t consistent = 0;
  for (const auto& [gid, n_visible] : visible) {
    const std::vector<Pid>& ids = trajectory[gid];
    std::map<Pid, std::size_t> counts;
    for (Pid p : ids) ++counts[p];
    std::size_t best = 0;
    for (const auto& [p, c] : counts) best = std::max(best, c);
    if (double(best) >= kConsistencyCoverage * double(n_visible)) ++consistent;
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i] != ids[i - 1]) ++m.id_switches;
  }
  m.id_consistency = visible.empty() ? 0.0 : double(consistent) / double(visible.size());

  double acc = 0.0;
  for (const auto& key : matched) {
    const double tp = double(tpa[key]);
    const double fn = double(visible[key.first]) - tp;
    const double fp = double(predicted[key.second]) - tp;
    acc += tp / (tp + fn + fp);
  }
  m.matches = matched.size();
  m.assoc_accuracy = matched.empty() ? 0.0 : acc / double(matched.size());
  return m;
}

}  // namespace samba::metrics
