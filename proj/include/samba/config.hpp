#pragma once

// Run configuration: one JSON document with model, tracker, scene, train,
// eval, bench and output sections. Every field has a default; unknown keys
// are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include "samba/model.hpp"
#include "samba/propagation.hpp"
#include "samba/simulator.hpp"
#include "samba/trainer.hpp"

namespace samba::config {

struct EvalConfig {
  std::uint64_t first_seed = 1000;  // held-out scenes use scene seeds first_seed + i
  std::size_t scenes = 10;
};

struct BenchConfig {
  std::vector<std::size_t> lengths{4096, 8192, 16384};
  std::vector<std::size_t> ks{4, 8, 16, 32};
  std::size_t k_for_lengths = 4;
  std::size_t length_for_ks = 512;
};

struct RunConfig {
  std::uint64_t seed = 0;
  model::ModelConfig model;
  propagation::TrackerConfig tracker;
  sim::SceneConfig scene;
  train::TrainConfig train;
  EvalConfig eval;
  BenchConfig bench;
  std::string output_dir = "out";

  // Cross-section checks; throws samba::Error.
  void validate() const;
  // --seed: the run seed, the training seed and the scene seed.
  void apply_seed(std::uint64_t s);
};

RunConfig parse(const std::string& json_text);
RunConfig load(const std::string& path);
std::string serialize(const RunConfig& cfg);

}  // namespace samba::config
