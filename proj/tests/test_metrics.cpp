#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "helpers.hpp"
#include "samba/metrics.hpp"

using namespace samba;
using namespace samba::metrics;
using propagation::TrackRecord;
using propagation::TrackStatus;

namespace {

using Records = std::vector<std::vector<TrackRecord>>;

Records ground_truth_tracker(const sim::SyntheticScene& s) {
  Records out(s.frames.size());
  for (std::size_t t = 0; t < s.frames.size(); ++t)
    for (const sim::GroundTruth& g : s.frames[t].objects)
      if (g.visible) out[t].push_back({t, std::uint64_t(g.id), g.box, 1.0, TrackStatus::active});
  return out;
}

sim::SyntheticScene two_objects() {
  // Object 0 walks right along y = 0.3, object 1 left along y = 0.7; object 1
  // is hidden in frame 2.
  sim::SyntheticScene s;
  s.frames.resize(5);
  for (std::size_t t = 0; t < 5; ++t) {
    sim::GroundTruth a, b;
    a.id = 0;
    a.box = {0.1 + 0.1 * double(t), 0.3, 0.1, 0.1};
    b.id = 1;
    b.box = {0.9 - 0.1 * double(t), 0.7, 0.1, 0.1};
    b.visible = t != 2;
    s.frames[t].objects = {a, b};
  }
  return s;
}

// Independent reference: per-frame exhaustive matching (maximum matches,
// then minimum total distance) and direct counting.
Metrics brute_force(const Records& recs, const sim::SyntheticScene& s) {
  std::map<std::int64_t, std::size_t> vis;
  std::map<std::uint64_t, std::size_t> pred;
  std::vector<std::vector<std::pair<std::int64_t, std::uint64_t>>> per_frame(s.frames.size());
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const auto& f = s.frames[t];
    double sz = 0;
    std::size_t nv = 0;
    for (const auto& g : f.objects)
      if (g.visible) sz += (g.box.w + g.box.h) / 2, ++nv, ++vis[g.id];
    const double gate = nv ? 0.5 * sz / double(nv) : 0.0;
    std::vector<std::size_t> active;
    for (std::size_t r = 0; r < recs[t].size(); ++r)
      if (recs[t][r].status == TrackStatus::active) active.push_back(r), ++pred[recs[t][r].id];
    std::vector<std::size_t> gts;
    for (std::size_t g = 0; g < f.objects.size(); ++g)
      if (f.objects[g].visible) gts.push_back(g);
    // Enumerate assignments gt -> record or none.
    std::vector<std::pair<std::size_t, std::size_t>> best;
    double best_cost = 0;
    std::vector<int> choice(gts.size(), -1);
    auto rec = [&](auto&& self, std::size_t i, std::set<std::size_t>& used) -> void {
      if (i == gts.size()) {
        std::vector<std::pair<std::size_t, std::size_t>> m;
        double cost = 0;
        for (std::size_t j = 0; j < gts.size(); ++j)
          if (choice[j] >= 0) {
            const auto& g = f.objects[gts[j]].box;
            const auto& b = recs[t][std::size_t(choice[j])].box;
            cost += std::hypot(g.cx - b.cx, g.cy - b.cy);
            m.emplace_back(gts[j], std::size_t(choice[j]));
          }
        if (m.size() > best.size() || (m.size() == best.size() && cost < best_cost)) best = m, best_cost = cost;
        return;
      }
      choice[i] = -1;
      self(self, i + 1, used);
      for (std::size_t r : active) {
        if (used.count(r)) continue;
        const auto& g = f.objects[gts[i]].box;
        const auto& b = recs[t][r].box;
        if (std::hypot(g.cx - b.cx, g.cy - b.cy) >= gate) continue;
        used.insert(r);
        choice[i] = int(r);
        self(self, i + 1, used);
        used.erase(r);
      }
      choice[i] = -1;
    };
    std::set<std::size_t> used;
    rec(rec, 0, used);
    for (const auto& [g, r] : best) per_frame[t].emplace_back(f.objects[g].id, recs[t][r].id);
  }
  Metrics m;
  std::map<std::pair<std::int64_t, std::uint64_t>, std::size_t> tpa;
  for (const auto& f : per_frame)
    for (const auto& p : f) ++tpa[p];
  std::size_t consistent = 0;
  for (const auto& [gid, nv] : vis) {
    std::vector<std::uint64_t> traj;
    for (const auto& f : per_frame)
      for (const auto& [g, p] : f)
        if (g == gid) traj.push_back(p);
    std::size_t best = 0;
    for (std::uint64_t p : traj) best = std::max<std::size_t>(best, std::count(traj.begin(), traj.end(), p));
    consistent += double(best) >= 0.8 * double(nv);
    for (std::size_t i = 1; i < traj.size(); ++i) m.id_switches += traj[i] != traj[i - 1];
  }
  m.id_consistency = double(consistent) / double(vis.size());
  double acc = 0;
  for (const auto& f : per_frame)
    for (const auto& key : f) {
      const double tp = double(tpa[key]);
      acc += tp / (tp + (double(vis[key.first]) - tp) + (double(pred[key.second]) - tp));
      ++m.matches;
    }
  m.assoc_accuracy = m.matches ? acc / double(m.matches) : 0.0;
  return m;
}

}  // namespace

TEST_CASE("perfect tracker") {
  sim::SceneConfig cfg;
  cfg.occlusion_rate = 0.1;
  const auto scene = sim::generate_scene(cfg);
  const Metrics m = evaluate(ground_truth_tracker(scene), scene);
  CHECK(m.id_consistency == 1.0);
  CHECK(m.id_switches == 0);
  CHECK(m.assoc_accuracy == 1.0);
}

TEST_CASE("a fresh id every frame") {
  sim::SceneConfig cfg;
  cfg.occlusion_rate = 0.0;
  cfg.frames = 12;
  const auto scene = sim::generate_scene(cfg);
  Records recs = ground_truth_tracker(scene);
  std::uint64_t next = 0;
  for (auto& f : recs)
    for (auto& r : f) r.id = next++;
  const Metrics m = evaluate(recs, scene);
  CHECK(m.id_switches == scene.num_objects() * (cfg.frames - 1));
  CHECK(m.id_consistency == 0.0);
  CHECK(m.assoc_accuracy == doctest::Approx(1.0 / double(cfg.frames)));
}

TEST_CASE("small instance against exhaustive matching") {
  const auto scene = two_objects();
  SUBCASE("ids swap halfway") {
    Records recs(5);
    for (std::size_t t = 0; t < 5; ++t) {
      const bool swapped = t >= 3;
      recs[t].push_back({t, swapped ? 11u : 10u, scene.frames[t].objects[0].box, 1.0, TrackStatus::active});
      if (scene.frames[t].objects[1].visible)
        recs[t].push_back({t, swapped ? 10u : 11u, scene.frames[t].objects[1].box, 1.0, TrackStatus::active});
    }
    const Metrics want = brute_force(recs, scene);
    const Metrics got = evaluate(recs, scene);
    CHECK(got.id_switches == want.id_switches);
    CHECK(got.id_switches == 2);
    CHECK(got.id_consistency == want.id_consistency);
    CHECK(got.assoc_accuracy == doctest::Approx(want.assoc_accuracy).epsilon(1e-15));
    CHECK(got.id_consistency == 0.0);
    // Hand count: pairs (0,10) x3, (0,11) x2, (1,11) x2, (1,10) x2; object 0
    // is visible 5 times, object 1 four times; id 10 has 5 records, id 11 four.
    const double hand = (3 * 3.0 / 7 + 2 * 2.0 / 7 + 2 * 2.0 / 6 + 2 * 2.0 / 7) / 9.0;
    CHECK(got.assoc_accuracy == doctest::Approx(hand).epsilon(1e-15));
  }
  SUBCASE("offset, inactive and spurious records") {
    Records recs(5);
    for (std::size_t t = 0; t < 5; ++t) {
      Box a = scene.frames[t].objects[0].box;
      a.cx += 0.03;
      recs[t].push_back({t, 1u, a, 1.0, TrackStatus::active});
      recs[t].push_back({t, 2u, scene.frames[t].objects[1].box,
                         0.2, t == 2 ? TrackStatus::inactive : TrackStatus::active});
      if (t == 4) recs[t].push_back({t, 3u, {0.5, 0.5, 0.1, 0.1}, 0.9, TrackStatus::active});
      if (t == 1) recs[t][0].box.cx += 0.2;  // outside the gate
    }
    const Metrics want = brute_force(recs, scene);
    const Metrics got = evaluate(recs, scene);
    CHECK(got.matches == want.matches);
    CHECK(got.id_switches == want.id_switches);
    CHECK(got.id_consistency == want.id_consistency);
    CHECK(got.assoc_accuracy == doctest::Approx(want.assoc_accuracy).epsilon(1e-15));
  }
}

TEST_CASE("frame count mismatch and metric bounds") {
  const auto scene = two_objects();
  CHECK_THROWS_AS(evaluate(Records(4), scene), Error);
  const Metrics empty = evaluate(Records(5), scene);
  CHECK(empty.id_consistency == 0.0);
  CHECK(empty.assoc_accuracy == 0.0);
  CHECK(match_threshold(scene.frames[0]) == doctest::Approx(0.05));
}
