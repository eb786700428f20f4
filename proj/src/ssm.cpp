#include "samba/ssm.hpp"

#include <cmath>

#include "samba/ops.hpp"

namespace samba::ssm {

namespace {

// softplus^{-1}(y) = y + log(1 - exp(-y))
double inverse_softplus(double y) { return y + std::log(-std::expm1(-y)); }

}  // namespace

std::size_t default_rank(std::size_t channels) {
  return std::max<std::size_t>(1, (channels + 15) / 16);
}

SelectiveSsmParams SelectiveSsmParams::init(std::size_t channels, std::size_t state,
                                            std::size_t rank, Rng& rng) {
  if (channels == 0 || state == 0 || rank == 0) {
    throw Error("ssm: channels, state size and rank must all be at least 1");
  }
  SelectiveSsmParams p;
  p.channels = channels;
  p.state = state;
  p.rank = rank;

  std::vector<double> a_log(channels * state);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t n = 0; n < state; ++n) a_log[c * state + n] = std::log(static_cast<double>(n + 1));
  p.a_log = Tensor::parameter({channels, state}, std::move(a_log));

  // softplus(delta_bias) log-uniform in [1e-3, 1e-1]
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  std::vector<double> bias(channels);
  for (double& b : bias) b = inverse_softplus(std::exp(log_dt(rng)));
  p.delta_bias = Tensor::parameter({channels}, std::move(bias));

  p.w_delta_down = normal_parameter({channels, rank}, 1.0 / std::sqrt(double(channels)), rng);
  p.w_delta_up = uniform_parameter({rank, channels}, 1.0 / std::sqrt(double(rank)), rng);
  p.w_b = normal_parameter({channels, state}, 1.0 / std::sqrt(double(channels)), rng);
  p.w_c = normal_parameter({channels, state}, 1.0 / std::sqrt(double(channels)), rng);
  return p;
}

void SelectiveSsmParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "a_log", a_log);
  fn(prefix + "delta_bias", delta_bias);
  fn(prefix + "w_delta_down", w_delta_down);
  fn(prefix + "w_delta_up", w_delta_up);
  fn(prefix + "w_b", w_b);
  fn(prefix + "w_c", w_c);
}

Selection selectivity(const SelectiveSsmParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != p.channels) {
    throw ShapeError("selectivity: expected [k x " + std::to_string(p.channels) + "] input, got " +
                     to_string(x.shape()));
  }
  Selection s;
  s.delta = softplus(add_row(matmul(matmul(x, p.w_delta_down), p.w_delta_up), p.delta_bias));
  s.b_t = matmul(x, p.w_b);
  s.c_t = matmul(x, p.w_c);
  return s;
}

Discretized discretize_zoh(const Tensor& delta, const SelectiveSsmParams& p) {
  return {zoh_decay(delta, p.a_log), zoh_input_gain(delta, p.a_log)};
}

Tensor ltmu_step(const SelectiveSsmParams& p, const Tensor& h_prev, const Tensor& x,
                 const std::vector<bool>& observe) {
  const Selection s = selectivity(p, x);
  const Discretized d = discretize_zoh(s.delta, p);
  if (h_prev.shape() != d.a_bar.shape()) {
    throw ShapeError("ltmu_step: hidden state shape " + to_string(h_prev.shape()) +
                     " does not match " + to_string(d.a_bar.shape()));
  }
  return ltmu_update(mul(d.a_bar, h_prev), d.b_coeff, s.b_t, x, observe);
}

Tensor output_update(const Tensor& h_sync, const Tensor& c_t) { return state_readout(h_sync, c_t); }

ScanResult scan(const SelectiveSsmParams& p, const Tensor& xs, const std::vector<bool>& observe) {
  if (xs.rank() != 2 || xs.dim(1) != p.channels) throw ShapeError("scan: bad input shape");
  const std::size_t t_len = xs.dim(0), c = p.channels, n = p.state;
  if (observe.size() != t_len) throw ShapeError("scan: observe mask length differs from T");
  Tensor h = Tensor::zeros({1, c * n});
  std::vector<Tensor> ys;
  ys.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const Tensor x = reshape(row(xs, t), {1, c});
    const Selection s = selectivity(p, x);
    const Discretized d = discretize_zoh(s.delta, p);
    h = ltmu_update(mul(d.a_bar, h), d.b_coeff, s.b_t, x, {observe[t]});
    ys.push_back(reshape(output_update(h, s.c_t), {c}));
  }
  return {stack_rows(ys, c), reshape(h, {c, n})};
}

}  // namespace samba::ssm
