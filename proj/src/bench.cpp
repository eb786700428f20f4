#include "samba/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "samba/init.hpp"

namespace samba::bench {

double time_rollout(const model::ModelConfig& cfg, std::size_t length, std::size_t k, std::uint64_t seed) {
  NoGradGuard no_grad;
  Rng rng(seed);
  const model::UnitParams p = model::UnitParams::init(cfg, rng);
  // A small pool of input frames, cycled, keeps memory flat at large T.
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Tensor> pool;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> v(k * cfg.d_model);
    for (double& x : v) x = g(rng);
    pool.push_back(Tensor::from({k, cfg.d_model}, std::move(v)));
  }
  const std::vector<double> conf(k, 0.9);
  std::vector<model::SambaState> states(k, model::SambaState::newborn(cfg));
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < length; ++t) model::set_step(p, states, pool[t % pool.size()], conf, 0.5);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_exponent: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error("fit_exponent: x values must differ");
  return sxy / sxx;
}

Result run(const model::ModelConfig& cfg, const Plan& plan, std::uint64_t seed) {
  Result r;
  const std::string mode(sync::to_string(cfg.sync_mode));
  std::vector<double> xs, ys;
  for (std::size_t len : plan.lengths) {
    const double s = time_rollout(cfg, len, plan.k_for_lengths, seed);
    r.samples.push_back({len, plan.k_for_lengths, s, mode});
    xs.push_back(double(len));
    ys.push_back(s);
  }
  if (xs.size() >= 2) r.length_exponent = fit_exponent(xs, ys);

  auto k_sweep = [&](const model::ModelConfig& c) {
    std::vector<double> kx, ky;
    for (std::size_t k : plan.ks) {
      double best = 0.0;
      for (std::size_t rep = 0; rep < std::max<std::size_t>(1, plan.k_repeats); ++rep) {
        const double s = time_rollout(c, plan.length_for_ks, k, seed);
        best = rep == 0 ? s : std::min(best, s);
      }
      r.samples.push_back({plan.length_for_ks, k, best, std::string(sync::to_string(c.sync_mode))});
      kx.push_back(double(k));
      ky.push_back(best);
    }
    return kx.size() >= 2 ? fit_exponent(kx, ky) : 0.0;
  };
  r.k_exponent_sync = k_sweep(cfg);
  model::ModelConfig off = cfg;
  off.sync_mode = sync::SyncMode::disabled;
  r.k_exponent_disabled = k_sweep(off);
  return r;
}

std::string csv(const Result& r) {
  std::ostringstream out;
  out << "T,k,seconds,mode\n";
  out.precision(9);
  for (const Sample& s : r.samples) out << s.length << ',' << s.k << ',' << s.seconds << ',' << s.mode << '\n';
  return out.str();
}

}  // namespace samba::bench
