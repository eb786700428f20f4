#include <doctest.h>

#include <numbers>

#include "helpers.hpp"
#include "samba/ops.hpp"
#include "samba/ssm.hpp"

using namespace samba;
using samba::testing::bit_equal;
using samba::testing::random_tensor;

namespace {

ssm::SelectiveSsmParams make(std::size_t c, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto p = ssm::SelectiveSsmParams::init(c, n, ssm::default_rank(c), rng);
  // Larger steps than the init range so the state moves visibly.
  auto b = p.delta_bias.mutable_data();
  for (double& v : b) v = -0.5;
  return p;
}

void fill(Tensor& t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

}  // namespace

TEST_CASE("init: A from a_log, step sizes in the configured range") {
  Rng rng(0);
  const auto p = ssm::SelectiveSsmParams::init(40, 4, ssm::default_rank(40), rng);
  CHECK(p.rank == 3);
  CHECK(p.a_log.at(5, 2) == doctest::Approx(std::log(3.0)));
  for (double b : p.delta_bias.data()) {
    const double dt = std::log1p(std::exp(b));
    CHECK(dt >= 1e-3 * (1 - 1e-12));
    CHECK(dt <= 1e-1 * (1 + 1e-12));
  }
  CHECK(ssm::default_rank(1) == 1);
  CHECK(ssm::default_rank(16) == 1);
  CHECK(ssm::default_rank(17) == 2);
}

TEST_CASE("selectivity examples") {
  auto p = make(4, 3, 1);
  fill(p.delta_bias, 0.0);
  const ssm::Selection zero = ssm::selectivity(p, Tensor::zeros({1, 4}));
  for (double d : zero.delta.data()) CHECK(d == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  for (double b : zero.b_t.data()) CHECK(b == 0.0);
  for (double c : zero.c_t.data()) CHECK(c == 0.0);

  fill(p.w_delta_up, 0.0);
  fill(p.delta_bias, -3.0);
  Rng rng(2);
  const ssm::Selection s = ssm::selectivity(p, random_tensor({2, 4}, rng));
  for (double d : s.delta.data()) CHECK(d == doctest::Approx(std::log1p(std::exp(-3.0))));

  fill(p.delta_bias, -800.0);
  const ssm::Selection tiny = ssm::selectivity(p, random_tensor({1, 4}, rng));
  for (double d : tiny.delta.data()) CHECK(d >= 0.0);
  CHECK_THROWS_AS(ssm::selectivity(p, Tensor::zeros({1, 3})), ShapeError);
}

TEST_CASE("zoh matches scalar closed form over random pairs") {
  Rng rng(3);
  std::uniform_real_distribution<double> log_a(std::log(1e-3), std::log(20.0));
  std::uniform_real_distribution<double> log_d(std::log(1e-9), std::log(10.0));
  const std::size_t n = 2000;
  std::vector<double> al(n), dl(n);
  for (std::size_t i = 0; i < n; ++i) {
    al[i] = log_a(rng);
    dl[i] = std::exp(log_d(rng));
  }
  // One sequence row per pair, one channel/state each.
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor a_log = Tensor::from({1, 1}, {al[i]});
    const Tensor delta = Tensor::from({1, 1}, {dl[i]});
    const double a = -std::exp(al[i]);
    const double da = dl[i] * a;
    const double want_bar = std::exp(da);
    const double want_b = std::abs(da) < 1e-6 ? dl[i] * (1 + da / 2) : std::expm1(da) / a;
    CHECK(std::abs(zoh_decay(delta, a_log).item() - want_bar) <= 1e-12 * std::abs(want_bar));
    CHECK(std::abs(zoh_input_gain(delta, a_log).item() - want_b) <= 1e-12 * std::abs(want_b));
  }
}

TEST_CASE("ltmu masked step is a_bar * h exactly") {
  const auto p = make(3, 2, 4);
  Rng rng(5);
  const Tensor h_prev = random_tensor({2, 6}, rng);
  const Tensor x = random_tensor({2, 3}, rng);
  const Tensor h = ssm::ltmu_step(p, h_prev, x, {false, true});
  const ssm::Selection s = ssm::selectivity(p, x);
  const ssm::Discretized d = ssm::discretize_zoh(s.delta, p);
  for (std::size_t j = 0; j < 6; ++j) CHECK(h.at(0, j) == d.a_bar.at(0, j) * h_prev.at(0, j));
  bool changed = false;
  for (std::size_t j = 0; j < 6; ++j) changed |= h.at(1, j) != d.a_bar.at(1, j) * h_prev.at(1, j);
  CHECK(changed);

  // Zero input: observed equals masked.
  const Tensor h0a = ssm::ltmu_step(p, h_prev, Tensor::zeros({2, 3}), {true, true});
  const Tensor h0b = ssm::ltmu_step(p, h_prev, Tensor::zeros({2, 3}), {false, false});
  CHECK(bit_equal(h0a.data(), h0b.data()));

  // Zero state, observed: pure injection pattern.
  const Tensor inj = ssm::ltmu_step(p, Tensor::zeros({2, 6}), x, {true, true});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t n = 0; n < 2; ++n)
        CHECK(inj.at(i, c * 2 + n) ==
              doctest::Approx(d.b_coeff.at(i, c * 2 + n) * s.b_t.at(i, n) * x.at(i, c)).epsilon(1e-14));
}

TEST_CASE("output_update matches a double loop") {
  Rng rng(6);
  const Tensor h = random_tensor({2, 12}, rng);
  const Tensor c_t = random_tensor({2, 4}, rng);
  const Tensor y = ssm::output_update(h, c_t);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      double want = 0;
      for (std::size_t n = 0; n < 4; ++n) want += c_t.at(i, n) * h.at(i, c * 4 + n);
      CHECK(std::abs(y.at(i, c) - want) < 1e-12);
    }
  const Tensor onehot = Tensor::from({1, 4}, {1, 0, 0, 0});
  const Tensor y1 = ssm::output_update(reshape(row(h, 0), {1, 12}), onehot);
  for (std::size_t c = 0; c < 3; ++c) CHECK(y1.at(0, c) == h.at(0, c * 4));
  const Tensor y0 = ssm::output_update(Tensor::zeros({2, 12}), c_t);
  for (double v : y0.data()) CHECK(v == 0.0);
}

TEST_CASE("scan: single step, all masked, causality") {
  const auto p = make(3, 2, 7);
  Rng rng(8);
  const Tensor xs = random_tensor({6, 3}, rng);

  const ssm::ScanResult one = ssm::scan(p, reshape(row(xs, 0), {1, 3}), {true});
  const Tensor x0 = reshape(row(xs, 0), {1, 3});
  const Tensor h1 = ssm::ltmu_step(p, Tensor::zeros({1, 6}), x0, {true});
  const Tensor y1 = ssm::output_update(h1, ssm::selectivity(p, x0).c_t);
  CHECK(bit_equal(one.ys.data(), y1.data()));

  const ssm::ScanResult masked = ssm::scan(p, xs, std::vector<bool>(6, false));
  for (double v : masked.ys.data()) CHECK(v == 0.0);

  const std::vector<bool> obs{true, true, false, true, true, true};
  const ssm::ScanResult base = ssm::scan(p, xs, obs);
  for (std::size_t tp = 0; tp < 6; ++tp) {
    std::vector<double> v(xs.data().begin(), xs.data().end());
    for (std::size_t c = 0; c < 3; ++c) v[tp * 3 + c] += 0.5;
    const ssm::ScanResult pert = ssm::scan(p, Tensor::from({6, 3}, v), obs);
    for (std::size_t t = 0; t < tp; ++t)
      for (std::size_t c = 0; c < 3; ++c) CHECK(pert.ys.at(t, c) == base.ys.at(t, c));
  }
  CHECK_THROWS_AS(ssm::scan(p, xs, {true}), ShapeError);
}

TEST_CASE("masked run decays geometrically") {
  const auto p = make(3, 2, 9);
  Rng rng(10);
  const Tensor xs = random_tensor({12, 3}, rng);
  Tensor h = random_tensor({1, 6}, rng);
  const double h0 = std::sqrt(sum(mul(h, h)).item());
  double rho = 0.0;
  for (std::size_t t = 0; t < 12; ++t) {
    const Tensor x = reshape(row(xs, t), {1, 3});
    const auto d = ssm::discretize_zoh(ssm::selectivity(p, x).delta, p);
    for (double a : d.a_bar.data()) {
      CHECK(a < 1.0);
      rho = std::max(rho, a);
    }
    h = ssm::ltmu_step(p, h, x, {false});
    CHECK(std::sqrt(sum(mul(h, h)).item()) <= std::pow(rho, double(t + 1)) * h0 * (1 + 1e-12));
  }
}
