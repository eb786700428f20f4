#include <doctest.h>

#include <cstdlib>

#include "helpers.hpp"
#include "samba/kernels.hpp"

using namespace samba;
using samba::testing::randn;

namespace {

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
  return m;
}

}  // namespace

TEST_CASE("scalar gemm hand example") {
  const auto& k = kernels::scalar_backend();
  const double a[4] = {1, 2, 3, 4}, b[2] = {1, 1};
  double c[2] = {0, 0};
  k.gemm_nn(2, 1, 2, a, b, c, false);
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
  k.gemm_nn(2, 1, 2, a, b, c, true);
  CHECK(c[0] == 6.0);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const kernels::Backend* simd = kernels::avx2_backend();
  if (!simd) {
    MESSAGE("AVX2 backend unavailable; skipping");
    return;
  }
  const auto& ref = kernels::scalar_backend();
  Rng rng(7);
  // Odd sizes exercise the vector tails.
  for (std::size_t m : {1u, 3u, 8u, 13u}) {
    for (std::size_t n : {1u, 4u, 7u, 33u}) {
      for (std::size_t kk : {1u, 5u, 16u, 19u}) {
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(kk);
        const auto a = randn(m * kk, rng), b = randn(kk * n, rng), bt = randn(n * kk, rng),
                   at = randn(kk * m, rng), c0 = randn(m * n, rng);
        for (bool acc : {false, true}) {
          auto c1 = c0, c2 = c0;
          ref.gemm_nn(m, n, kk, a.data(), b.data(), c1.data(), acc);
          simd->gemm_nn(m, n, kk, a.data(), b.data(), c2.data(), acc);
          CHECK(rel_diff(c1, c2) < 1e-12);
          c1 = c0, c2 = c0;
          ref.gemm_nt(m, n, kk, a.data(), bt.data(), c1.data(), acc);
          simd->gemm_nt(m, n, kk, a.data(), bt.data(), c2.data(), acc);
          CHECK(rel_diff(c1, c2) < 1e-12);
          c1 = c0, c2 = c0;
          ref.gemm_tn(m, n, kk, at.data(), b.data(), c1.data(), acc);
          simd->gemm_tn(m, n, kk, at.data(), b.data(), c2.data(), acc);
          CHECK(rel_diff(c1, c2) < 1e-12);
        }
      }
    }
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 101u}) {
    CAPTURE(n);
    const auto x = randn(n, rng), y = randn(n, rng);
    CHECK(std::abs(ref.dot(n, x.data(), y.data()) - simd->dot(n, x.data(), y.data())) < 1e-12 * (1.0 + n));
    auto y1 = y, y2 = y;
    ref.axpy(n, 0.37, x.data(), y1.data());
    simd->axpy(n, 0.37, x.data(), y2.data());
    CHECK(rel_diff(y1, y2) < 1e-14);
    std::vector<double> z1(n), z2(n);
    ref.add(n, x.data(), y.data(), z1.data());
    simd->add(n, x.data(), y.data(), z2.data());
    CHECK(z1 == z2);
    ref.mul(n, x.data(), y.data(), z1.data());
    simd->mul(n, x.data(), y.data(), z2.data());
    CHECK(z1 == z2);
    z1 = y, z2 = y;
    ref.mul_acc(n, x.data(), y.data(), z1.data());
    simd->mul_acc(n, x.data(), y.data(), z2.data());
    CHECK(rel_diff(z1, z2) < 1e-14);
  }
}

TEST_CASE("backend selection by name") {
  const std::string before = kernels::active().name;
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("neon"));
  if (kernels::avx2_backend()) {
    CHECK(kernels::select("avx2"));
    CHECK(std::string(kernels::active().name) == "avx2");
  }
  CHECK(kernels::select(before));
}
