#pragma once

// Toy-scale training of the propagation parameters. A clip of uniformly
// spaced frames runs through the tracker with one track per ground-truth
// object; only the last grad_frames frames are recorded on the tape.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "samba/propagation.hpp"
#include "samba/simulator.hpp"

namespace samba::train {

struct TrainConfig {
  std::size_t clip_len = 10;
  std::size_t grad_frames = 5;
  std::pair<std::size_t, std::size_t> frame_interval_range{1, 10};
  double lr = 2.0e-4;
  std::vector<std::size_t> lr_drop_epochs;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 200;
  double weight_decay = 1e-4;
  std::pair<double, double> adam_betas{0.9, 0.999};
  double adam_eps = 1e-8;
  double grad_clip_norm = 0.1;  // <= 0 disables clipping
  std::size_t batch_scenes = 1;
  std::size_t train_scenes = 8;  // scene seeds are scene.seed + i
  std::uint64_t seed = 0;

  void validate() const;
};

// clip_len frame indices with spacing drawn uniformly from the admissible
// intervals and a uniformly drawn admissible start.
std::vector<std::size_t> sample_clip(std::size_t scene_len, const TrainConfig& cfg, Rng& rng);

struct StepOptions {
  // Record the prefix on the tape too and cut it by copying values at the
  // boundary. Same gradients, used to check the truncation.
  bool tape_prefix = false;
  // When set, observation embeddings become gradient-tracked leaves and are
  // returned per clip frame (empty for frames without observations).
  std::vector<std::vector<Tensor>>* inputs = nullptr;
  // Multiplies the loss before backward (batch averaging).
  double loss_scale = 1.0;
  bool run_backward = true;
};

struct StepResult {
  double loss = 0.0;
  std::size_t supervised = 0;  // (track, frame) pairs in the loss
  Tensor loss_node;            // unscaled loss tensor, undefined without supervision
};

// Loss for one clip; accumulates gradients into params. Throws NumericError
// with diagnostics on a non-finite loss.
StepResult train_step(propagation::PropagationParams& params, const sim::SyntheticScene& scene,
                      const std::vector<std::size_t>& clip, const propagation::TrackerConfig& tracker,
                      const TrainConfig& cfg, const StepOptions& opts = {});

// Global L2 norm over all gradients, then rescale to max_norm when larger.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm);

void zero_grads(const std::vector<Tensor*>& params);

// Every trainable tensor in visiting order.
std::vector<Tensor*> parameter_list(propagation::PropagationParams& params);

// lr divided by 10 for every drop epoch <= epoch.
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

// AdamW with decoupled weight decay: p -= lr*wd*p, then the bias-corrected
// Adam step. Parameters without a gradient count as zero gradient.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);
  void step(const std::vector<Tensor*>& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct LossPoint {
  std::size_t step, epoch;
  double loss, lr;
};

struct TrainResult {
  std::vector<LossPoint> curve;
};

std::vector<sim::SyntheticScene> training_scenes(const sim::SceneConfig& scene, const TrainConfig& cfg);

// Runs epochs * steps_per_epoch optimizer steps. on_step, when given, sees
// every point as it is produced.
TrainResult train(propagation::PropagationParams& params, const std::vector<sim::SyntheticScene>& scenes,
                  const propagation::TrackerConfig& tracker, const TrainConfig& cfg,
                  const std::function<void(const LossPoint&)>& on_step = {});

// Mean loss over a fixed set of clips, without gradients.
double evaluate_loss(propagation::PropagationParams& params, const std::vector<sim::SyntheticScene>& scenes,
                     const std::vector<std::vector<std::size_t>>& clips,
                     const propagation::TrackerConfig& tracker, const TrainConfig& cfg);

}  // namespace samba::train
