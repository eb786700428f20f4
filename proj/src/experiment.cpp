#include "samba/experiment.hpp"

#include <cstdio>
#include <mutex>
#include <sstream>

#include "samba/parallel.hpp"

namespace samba::experiment {

SceneRun run_scene(const propagation::PropagationParams& params, const propagation::TrackerConfig& tracker,
                   const sim::SyntheticScene& scene) {
  propagation::Tracker trk(params, tracker);
  SceneRun out;
  for (std::size_t t = 0; t < scene.frames.size(); ++t) out.records.push_back(trk.step(t, scene.frames[t].detections));
  out.metrics = metrics::evaluate(out.records, scene);
  return out;
}

sim::SceneConfig heldout_scene(const config::RunConfig& cfg, std::size_t i) {
  sim::SceneConfig sc = cfg.scene;
  sc.seed = cfg.eval.first_seed + cfg.scene.seed + i;
  return sc;
}

Summary summarize(std::vector<metrics::Metrics> per_scene) {
  Summary s;
  s.per_scene = std::move(per_scene);
  for (const metrics::Metrics& m : s.per_scene) {
    s.id_consistency += m.id_consistency;
    s.id_switches += double(m.id_switches);
    s.assoc_accuracy += m.assoc_accuracy;
  }
  if (!s.per_scene.empty()) {
    const double n = double(s.per_scene.size());
    s.id_consistency /= n;
    s.id_switches /= n;
    s.assoc_accuracy /= n;
  }
  return s;
}

Summary evaluate_heldout(const propagation::PropagationParams& params, const config::RunConfig& cfg) {
  std::vector<metrics::Metrics> per(cfg.eval.scenes);
  parallel_for(per.size(), [&](std::size_t i) {
    per[i] = run_scene(params, cfg.tracker, sim::generate_scene(heldout_scene(cfg, i))).metrics;
  });
  return summarize(std::move(per));
}

std::vector<Variant> ablation_variants(const config::RunConfig& cfg) {
  const sync::SyncMode on =
      cfg.model.sync_mode == sync::SyncMode::disabled ? sync::SyncMode::posterior : cfg.model.sync_mode;
  using propagation::OcclusionStrategy;
  return {{"sync+maskobs", on, OcclusionStrategy::maskobs},
          {"nosync+maskobs", sync::SyncMode::disabled, OcclusionStrategy::maskobs},
          {"sync+freeze", on, OcclusionStrategy::freeze},
          {"nosync+freeze", sync::SyncMode::disabled, OcclusionStrategy::freeze}};
}

std::vector<AblationRow> run_ablation(const config::RunConfig& cfg,
                                      const std::function<void(const std::string&)>& progress) {
  const std::vector<Variant> variants = ablation_variants(cfg);
  std::vector<AblationRow> rows(variants.size());
  const std::vector<sim::SyntheticScene> scenes = train::training_scenes(cfg.scene, cfg.train);
  std::mutex mu;
  parallel_for(variants.size(), [&](std::size_t v) {
    config::RunConfig run = cfg;
    run.model.sync_mode = variants[v].sync_mode;
    run.tracker.occlusion_strategy = variants[v].occlusion;
    Rng rng(run.seed);
    propagation::PropagationParams params = propagation::PropagationParams::init(run.model, rng);
    const train::TrainResult tr = train::train(params, scenes, run.tracker, run.train);
    rows[v].variant = variants[v];
    rows[v].final_loss = tr.curve.empty() ? 0.0 : tr.curve.back().loss;
    rows[v].summary = evaluate_heldout(params, run);
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: id_consistency %.3f, id_switches %.2f, assoc_accuracy %.3f",
                    variants[v].name.c_str(), rows[v].summary.id_consistency, rows[v].summary.id_switches,
                    rows[v].summary.assoc_accuracy);
      progress(buf);
    }
  });
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,sync,maskobs,id_consistency,id_switches,assoc_accuracy,final_loss\n";
  out.precision(6);
  for (const AblationRow& r : rows) {
    out << r.variant.name << ',' << (r.variant.sync_mode != sync::SyncMode::disabled) << ','
        << (r.variant.occlusion == propagation::OcclusionStrategy::maskobs) << ',' << r.summary.id_consistency
        << ',' << r.summary.id_switches << ',' << r.summary.assoc_accuracy << ',' << r.final_loss << '\n';
  }
  return out.str();
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "     Sync  MaskObs | IDcons  IDsw    AssA\n";
  out << "-------------------+-----------------------\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    char buf[128];
    std::snprintf(buf, sizeof buf, "(%c)  %-4s  %-7s | %.3f  %6.2f  %.3f\n", char('a' + i),
                  r.variant.sync_mode != sync::SyncMode::disabled ? "x" : "",
                  r.variant.occlusion == propagation::OcclusionStrategy::maskobs ? "x" : "",
                  r.summary.id_consistency, r.summary.id_switches, r.summary.assoc_accuracy);
    out << buf;
  }
  return out.str();
}

}  // namespace samba::experiment
