#include <doctest.h>

#include <numbers>

#include "helpers.hpp"
#include "samba/ops.hpp"

using namespace samba;
using samba::testing::random_parameter;
using samba::testing::random_tensor;

TEST_CASE("matmul examples") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({2, 1}, {1, 1});
  const Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);

  Rng rng(1);
  const Tensor x = random_tensor({3, 5}, rng);
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(samba::testing::bit_equal(matmul(eye, x).data(), x.data()));
  const Tensor z = matmul(Tensor::zeros({2, 3}), x);
  CHECK(z.shape() == Shape{2, 5});
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(matmul(x, x), ShapeError);
}

TEST_CASE("softplus asymptotes") {
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(std::abs(softplus(Tensor::scalar(100.0)).item() - 100.0) / 100.0 < 1e-12);
  const double low = softplus(Tensor::scalar(-100.0)).item();
  CHECK(low > 0.0);
  CHECK(low < 1e-40);
}

TEST_CASE("softmax, layer_norm and conv identities") {
  const Tensor s = softmax(Tensor::from({3}, {0, 0, 0}));
  for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

  const Tensor ln = layer_norm(Tensor::from({4}, {2.5, 2.5, 2.5, 2.5}), Tensor::full({4}, 3.0),
                               Tensor::zeros({4}));
  for (double v : ln.data()) CHECK(v == 0.0);

  Rng rng(2);
  const Tensor row = layer_norm(random_tensor({2, 6}, rng, 3.0), Tensor::full({6}, 1.0), Tensor::zeros({6}));
  for (std::size_t i = 0; i < 2; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 6; ++j) m += row.at(i, j) / 6;
    for (std::size_t j = 0; j < 6; ++j) v += (row.at(i, j) - m) * (row.at(i, j) - m) / 6;
    CHECK(std::abs(m) < 1e-12);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-5));
  }

  const Tensor x = random_tensor({7, 3}, rng);
  const Tensor kernel = Tensor::from({4, 3}, {1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const Tensor y = causal_conv1d(x, kernel, random_tensor({3, 3}, rng));
  CHECK(samba::testing::bit_equal(y.data(), x.data()));
}

TEST_CASE("causal_conv1d streaming equals batch exactly") {
  Rng rng(3);
  const std::size_t T = 9, C = 5, K = 4;
  const Tensor x = random_tensor({T, C}, rng);
  const Tensor kernel = random_tensor({K, C}, rng);
  const Tensor buffer0 = random_tensor({K - 1, C}, rng);
  const Tensor batch = causal_conv1d(x, kernel, buffer0);

  Tensor buffer = buffer0;
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor u = reshape(row(x, t), {1, C});
    std::vector<Tensor> lags;
    for (std::size_t j = 0; j + 1 < K; ++j) lags.push_back(reshape(row(buffer, j), {1, C}));
    const Tensor step = conv_step(u, lags, kernel);
    for (std::size_t c = 0; c < C; ++c) CHECK(step.at(0, c) == batch.at(t, c));
    buffer = shift_in(buffer, row(x, t));
  }
}

TEST_CASE("backward on simple losses") {
  Rng rng(4);
  Tensor x = random_parameter({3, 2}, rng);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
}

TEST_CASE("finite_diff oracle") {
  Rng rng(5);
  Tensor theta = random_parameter({4}, rng);
  const Tensor g = finite_diff([&] { return sum(theta).item(); }, theta);
  for (double v : g.data()) CHECK(std::abs(v - 1.0) < 1e-9);

  Tensor t3 = Tensor::parameter({1}, {3.0});
  const Tensor sq = finite_diff([&] { return t3.at(0) * t3.at(0); }, t3, 1e-5);
  CHECK(std::abs(sq.at(0) - 6.0) < 1e-6);
  CHECK(t3.at(0) == 3.0);
}

TEST_CASE("no-grad forward is bit-identical and records nothing") {
  Rng rng(6);
  const Tensor w = random_parameter({4, 4}, rng);
  const Tensor x = random_tensor({2, 4}, rng);
  auto f = [&] {
    return layer_norm(silu(matmul(x, w)), Tensor::full({4}, 1.5), Tensor::full({4}, 0.1));
  };
  const Tensor tracked = f();
  CHECK(tracked.requires_grad());
  Tensor plain;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    plain = f();
  }
  CHECK(grad_enabled());
  CHECK_FALSE(plain.requires_grad());
  CHECK(samba::testing::bit_equal(tracked.data(), plain.data()));
  CHECK(Tape::reachable_from(plain).size() <= 1);
}

TEST_CASE("tape visits nodes in reverse creation order") {
  Rng rng(7);
  const Tensor a = random_parameter({3}, rng);
  const Tensor b = mul(a, a);
  const Tensor c = add(b, a);
  const Tensor loss = sum(mul(c, b));
  const auto order = Tape::reachable_from(loss).visit_order();
  REQUIRE(order.size() >= 4);
  for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i] < order[i - 1]);
}

TEST_CASE("detach cuts gradient flow") {
  const Tensor a = Tensor::parameter({2}, {1.0, 2.0});
  const Tensor loss = sum(mul(a.detach(), a));
  backward(loss);
  CHECK(a.grad()[0] == 1.0);
  CHECK(a.grad()[1] == 2.0);
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(slice_cols(Tensor::zeros({2, 3}), 2, 4), ShapeError);
}

TEST_CASE("zoh closed form and Taylor branch") {
  // a = -exp(a_log) = -1, delta = ln 2
  const Tensor a_log = Tensor::from({1, 1}, {0.0});
  const Tensor delta = Tensor::from({1, 1}, {std::numbers::ln2});
  CHECK(zoh_decay(delta, a_log).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(zoh_input_gain(delta, a_log).item() == doctest::Approx(0.5).epsilon(1e-15));

  const Tensor tiny = Tensor::from({1, 1}, {1e-12});
  CHECK(zoh_decay(tiny, a_log).item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(zoh_input_gain(tiny, a_log).item() == doctest::Approx(1e-12).epsilon(1e-10));

  // d*a = -1e-7 takes the Taylor branch.
  const Tensor d7 = Tensor::from({1, 1}, {1e-7});
  const double exact = -std::expm1(-1e-7);
  CHECK(std::abs(zoh_input_gain(d7, a_log).item() - exact) / exact < 1e-10);
  CHECK_THROWS(zoh_decay(Tensor::from({1, 1}, {0.0}), a_log));
}
