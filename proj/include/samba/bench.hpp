#pragma once

// Wall-clock scaling of the set step in sequence length T and set size k.

#include <cstdint>
#include <string>
#include <vector>

#include "samba/model.hpp"

namespace samba::bench {

struct Sample {
  std::size_t length = 0;  // T
  std::size_t k = 0;
  double seconds = 0.0;
  std::string mode;  // sync mode during the measurement
};

struct Result {
  std::vector<Sample> samples;
  double length_exponent = 0.0;      // fitted over the length sweep
  double k_exponent_sync = 0.0;      // fitted over the k sweep, configured sync mode
  double k_exponent_disabled = 0.0;  // fitted over the k sweep, sync disabled
};

// Streams T set steps over k sequences without gradient tracking.
double time_rollout(const model::ModelConfig& cfg, std::size_t length, std::size_t k, std::uint64_t seed);

// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y);

struct Plan {
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> ks;
  std::size_t k_for_lengths = 4;
  std::size_t length_for_ks = 512;
  std::size_t k_repeats = 3;  // k sweep keeps the fastest of this many runs
};

Result run(const model::ModelConfig& cfg, const Plan& plan, std::uint64_t seed);

// T,k,seconds,mode
std::string csv(const Result& r);

}  // namespace samba::bench
