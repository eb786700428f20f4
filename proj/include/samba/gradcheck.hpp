#pragma once

// Analytic-versus-central-difference gradient checks, grouped by operation
// and by named parameter tensor.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "samba/tensor.hpp"

namespace samba::gradcheck {

inline constexpr double kTolerance = 1e-4;
inline constexpr double kStep = 1e-5;

struct GroupResult {
  std::string group;
  double max_rel_error = 0.0;
  std::size_t elements = 0;
  bool pass = true;
  // The element behind max_rel_error.
  std::size_t worst_index = 0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

struct Report {
  std::vector<GroupResult> groups;

  bool ok() const;
  std::vector<std::string> failures() const;
  // group,elements,max_rel_error,pass
  std::string csv() const;
  // Keeps the worst result per group name.
  void merge(const GroupResult& r);
};

// Checks d loss / d theta. loss must rebuild its graph on every call.
GroupResult check(const std::string& group, const std::function<Tensor()>& loss, Tensor& theta,
                  double tol = kTolerance);

struct Options {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  // Adds a group whose backward rule is deliberately wrong.
  bool corrupt_fixture = false;
  // Subsets by prefix: "ops", "ssm", "sync", "unit", "train_step", "fixture".
  std::vector<std::string> only;
};

Report run_all(const Options& opts);

}  // namespace samba::gradcheck
