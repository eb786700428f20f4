#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "samba/ops.hpp"
#include "samba/sync.hpp"

using namespace samba;
using samba::testing::bit_equal;
using samba::testing::random_tensor;

namespace {

sync::SyncParams live_params(std::uint64_t seed) {
  Rng rng(seed);
  auto p = sync::SyncParams::init(12, 8, 2, 2, rng);
  std::normal_distribution<double> g(0.0, 0.3);
  for (double& w : p.w_up.mutable_data()) w = g(rng);
  return p;
}

}  // namespace

TEST_CASE("identity at init") {
  Rng rng(0);
  const auto p = sync::SyncParams::init(12, 8, 2, 1, rng);
  for (double w : p.w_up.data()) CHECK(w == 0.0);
  const Tensor h = random_tensor({5, 12}, rng);
  CHECK(bit_equal(sync::synchronize(p, h).data(), h.data()));
}

TEST_CASE("set sizes from 0 to 64") {
  const auto p = live_params(1);
  Rng rng(2);
  for (std::size_t k : {0u, 1u, 2u, 7u, 64u}) {
    const Tensor out = sync::synchronize(p, random_tensor({k, 12}, rng));
    CHECK(out.shape() == Shape{k, 12});
  }
  CHECK(sync::synchronize(p, std::vector<Tensor>{}).empty());
  // A single token still passes through the feed-forward path.
  const Tensor h1 = random_tensor({1, 12}, rng);
  CHECK_FALSE(bit_equal(sync::synchronize(p, h1).data(), h1.data()));
}

TEST_CASE("permutation equivariance") {
  const auto p = live_params(3);
  Rng rng(4);
  const std::size_t k = 8;
  const Tensor h = random_tensor({k, 12}, rng);
  const Tensor base = sync::synchronize(p, h);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tensor> rows;
    for (std::size_t i : perm) rows.push_back(row(h, i));
    const Tensor out = sync::synchronize(p, stack_rows(rows, 12));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < 12; ++j) CHECK(std::abs(out.at(i, j) - base.at(perm[i], j)) <= 1e-12);
  }
}

TEST_CASE("list form matches the batched form") {
  const auto p = live_params(5);
  Rng rng(6);
  std::vector<Tensor> states;
  for (int i = 0; i < 3; ++i) states.push_back(random_tensor({3, 4}, rng));
  const auto out = sync::synchronize(p, states);
  std::vector<Tensor> flat;
  for (const Tensor& s : states) flat.push_back(reshape(s, {12}));
  const Tensor batched = sync::synchronize(p, stack_rows(flat, 12));
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].shape() == Shape{3, 4});
    CHECK(bit_equal(out[i].data(), row(batched, i).data()));
  }
  states.push_back(random_tensor({4, 3}, rng));
  CHECK_THROWS_AS(sync::synchronize(p, states), ShapeError);
}

TEST_CASE("mode names") {
  CHECK(sync::parse_sync_mode("posterior") == sync::SyncMode::posterior);
  CHECK(sync::parse_sync_mode("prior") == sync::SyncMode::prior);
  CHECK(sync::parse_sync_mode("disabled") == sync::SyncMode::disabled);
  CHECK_THROWS_AS(sync::parse_sync_mode("sometimes"), Error);
  CHECK(sync::to_string(sync::SyncMode::prior) == "prior");
  Rng rng(7);
  CHECK_THROWS_AS(sync::SyncParams::init(12, 9, 2, 1, rng), Error);
}
