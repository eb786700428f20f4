#pragma once

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <random>
#include <vector>

#include "samba/init.hpp"
#include "samba/tensor.hpp"

namespace samba::testing {

inline std::vector<double> randn(std::size_t n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
  const std::size_t n = numel(shape);
  return Tensor::from(std::move(shape), randn(n, rng, sd));
}

inline Tensor random_parameter(Shape shape, Rng& rng, double sd = 1.0) {
  const std::size_t n = numel(shape);
  return Tensor::parameter(std::move(shape), randn(n, rng, sd));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace samba::testing
