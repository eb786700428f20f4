#pragma once

// Tracker evaluation over held-out scenes and the component ablation sweep
// (sync on/off x MaskObs/freeze).

#include <functional>
#include <string>
#include <vector>

#include "samba/config.hpp"
#include "samba/io.hpp"
#include "samba/metrics.hpp"

namespace samba::experiment {

struct SceneRun {
  io::FrameRecords records;
  metrics::Metrics metrics;
};

SceneRun run_scene(const propagation::PropagationParams& params, const propagation::TrackerConfig& tracker,
                   const sim::SyntheticScene& scene);

sim::SceneConfig heldout_scene(const config::RunConfig& cfg, std::size_t i);

struct Summary {
  std::vector<metrics::Metrics> per_scene;
  double id_consistency = 0.0;
  double id_switches = 0.0;
  double assoc_accuracy = 0.0;
};

Summary summarize(std::vector<metrics::Metrics> per_scene);

// Runs the tracker over cfg.eval.scenes held-out scenes.
Summary evaluate_heldout(const propagation::PropagationParams& params, const config::RunConfig& cfg);

struct Variant {
  std::string name;
  sync::SyncMode sync_mode;
  propagation::OcclusionStrategy occlusion;
};

// Table rows, in order: sync + MaskObs, sync-off + MaskObs, sync + freeze,
// sync-off + freeze. Sync-on rows use cfg.model.sync_mode (posterior unless
// it is disabled).
std::vector<Variant> ablation_variants(const config::RunConfig& cfg);

struct AblationRow {
  Variant variant;
  Summary summary;
  double final_loss = 0.0;
};

// Trains one model per variant from the same initialization seed, then
// evaluates each on the held-out scenes. progress receives short status lines.
std::vector<AblationRow> run_ablation(const config::RunConfig& cfg,
                                      const std::function<void(const std::string&)>& progress = {});

// variant,sync,maskobs,id_consistency,id_switches,assoc_accuracy,final_loss
std::string ablation_csv(const std::vector<AblationRow>& rows);
// Fixed-width table with check marks for the enabled components.
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace samba::experiment
