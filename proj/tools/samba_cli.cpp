// samba: configs, gradient checks, scaling benchmarks, training, evaluation
// and scene generation.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or configuration
// error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "samba/bench.hpp"
#include "samba/checkpoint.hpp"
#include "samba/config.hpp"
#include "samba/experiment.hpp"
#include "samba/gradcheck.hpp"
#include "samba/io.hpp"
#include "samba/trainer.hpp"

namespace {

using namespace samba;

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Global seed (run, training and scene seeds)");
  cmd->add_option("--out", c.out, "Output directory (overrides output.dir)");
}

config::RunConfig resolve(const Common& c) {
  config::RunConfig cfg = c.config_path.empty() ? config::RunConfig{} : config::load(c.config_path);
  if (c.seed) cfg.apply_seed(*c.seed);
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw Error("cannot write " + path);
}

propagation::PropagationParams fresh_params(const config::RunConfig& cfg) {
  Rng rng(cfg.seed);
  return propagation::PropagationParams::init(cfg.model, rng);
}

int cmd_config_init(const std::string& out) {
  const std::string text = config::serialize(config::RunConfig{});
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
    std::cerr << "wrote " << out << "\n";
  }
  return kOk;
}

int cmd_gradcheck(const Common& c, bool corrupt, const std::vector<std::string>& only) {
  const config::RunConfig cfg = resolve(c);
  gradcheck::Options opts;
  opts.seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
  opts.corrupt_fixture = corrupt;
  opts.only = only;
  const gradcheck::Report rep = gradcheck::run_all(opts);
  std::cout << rep.csv();
  if (!c.out.empty()) {
    io::ensure_dir(cfg.output_dir);
    write_text(join(cfg.output_dir, "gradcheck.csv"), rep.csv());
  }
  if (!rep.ok()) {
    std::cerr << "gradcheck FAILED for:\n";
    for (const gradcheck::GroupResult& g : rep.groups) {
      if (g.pass) continue;
      std::fprintf(stderr, "  %s: element %zu analytic %.12e numeric %.12e\n", g.group.c_str(), g.worst_index,
                   g.worst_analytic, g.worst_numeric);
    }
    return kVerifyFailed;
  }
  std::cerr << "gradcheck passed: " << rep.groups.size() << " groups below " << gradcheck::kTolerance << "\n";
  return kOk;
}

int cmd_bench(const Common& c) {
  const config::RunConfig cfg = resolve(c);
  bench::Plan plan;
  plan.lengths = cfg.bench.lengths;
  plan.ks = cfg.bench.ks;
  plan.k_for_lengths = cfg.bench.k_for_lengths;
  plan.length_for_ks = cfg.bench.length_for_ks;
  const bench::Result r = bench::run(cfg.model, plan, cfg.seed);
  std::cout << bench::csv(r);
  std::fprintf(stderr, "exponent in T: %.3f\nexponent in k (sync %s): %.3f\nexponent in k (sync disabled): %.3f\n",
               r.length_exponent, std::string(sync::to_string(cfg.model.sync_mode)).c_str(), r.k_exponent_sync,
               r.k_exponent_disabled);
  io::ensure_dir(cfg.output_dir);
  write_text(join(cfg.output_dir, "bench.csv"), bench::csv(r));
  return kOk;
}

int cmd_train(const Common& c, bool ablation) {
  const config::RunConfig cfg = resolve(c);
  io::ensure_dir(cfg.output_dir);
  write_text(join(cfg.output_dir, "config.json"), config::serialize(cfg));
  if (ablation) {
    const auto rows = experiment::run_ablation(cfg, [](const std::string& s) { std::cerr << s << "\n"; });
    write_text(join(cfg.output_dir, "ablation.csv"), experiment::ablation_csv(rows));
    write_text(join(cfg.output_dir, "ablation.txt"), experiment::ablation_table(rows));
    std::cout << experiment::ablation_table(rows);
    return kOk;
  }
  propagation::PropagationParams params = fresh_params(cfg);
  const auto scenes = train::training_scenes(cfg.scene, cfg.train);
  std::ofstream loss_csv(join(cfg.output_dir, "loss.csv"), std::ios::trunc);
  if (!loss_csv) throw Error("cannot write " + join(cfg.output_dir, "loss.csv"));
  loss_csv << "step,epoch,loss,lr\n";
  loss_csv.precision(10);
  const std::size_t total = cfg.train.epochs * cfg.train.steps_per_epoch;
  train::train(params, scenes, cfg.tracker, cfg.train, [&](const train::LossPoint& p) {
    loss_csv << p.step << ',' << p.epoch << ',' << p.loss << ',' << p.lr << '\n';
    if ((p.step + 1) % 50 == 0 || p.step + 1 == total) {
      std::fprintf(stderr, "step %zu/%zu loss %.6f\n", p.step + 1, total, p.loss);
    }
  });
  const std::string ckpt = join(cfg.output_dir, "model.samb");
  io::save_checkpoint(ckpt, params);
  std::cerr << "wrote " << ckpt << "\n";
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const config::RunConfig cfg = resolve(c);
  propagation::PropagationParams params = fresh_params(cfg);
  if (!checkpoint.empty()) io::load_checkpoint(checkpoint, params);
  io::ensure_dir(cfg.output_dir);
  std::vector<metrics::Metrics> per;
  for (std::size_t i = 0; i < cfg.eval.scenes; ++i) {
    const sim::SyntheticScene scene = sim::generate_scene(experiment::heldout_scene(cfg, i));
    const experiment::SceneRun run = experiment::run_scene(params, cfg.tracker, scene);
    const std::string stem = join(cfg.output_dir, "scene_" + std::to_string(i));
    io::write_tracks_csv(run.records, stem + "_tracks.csv");
    io::write_tracks_jsonl(run.records, stem + "_tracks.jsonl");
    io::write_metrics_json(run.metrics, stem + "_metrics.json");
    per.push_back(run.metrics);
  }
  const experiment::Summary s = experiment::summarize(per);
  metrics::Metrics mean;
  mean.id_consistency = s.id_consistency;
  mean.assoc_accuracy = s.assoc_accuracy;
  for (const metrics::Metrics& m : per) {
    mean.id_switches += m.id_switches;
    mean.matches += m.matches;
  }
  io::write_metrics_json(mean, join(cfg.output_dir, "metrics.json"));
  std::printf("id_consistency %.4f\nid_switches %zu\nassoc_accuracy %.4f\n", mean.id_consistency,
              mean.id_switches, mean.assoc_accuracy);
  return kOk;
}

int cmd_simulate(const Common& c) {
  const config::RunConfig cfg = resolve(c);
  const std::string dir = join(cfg.output_dir, "scenes");
  io::ensure_dir(dir);
  const auto train_scenes = train::training_scenes(cfg.scene, cfg.train);
  for (std::size_t i = 0; i < train_scenes.size(); ++i) {
    const std::string stem = join(dir, "train_" + std::to_string(i));
    io::write_scene(train_scenes[i], stem + "_gt.jsonl", stem + "_det.jsonl");
  }
  for (std::size_t i = 0; i < cfg.eval.scenes; ++i) {
    const std::string stem = join(dir, "eval_" + std::to_string(i));
    io::write_scene(sim::generate_scene(experiment::heldout_scene(cfg, i)), stem + "_gt.jsonl",
                    stem + "_det.jsonl");
  }
  std::cerr << "wrote " << train_scenes.size() + cfg.eval.scenes << " scenes to " << dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchronized selective state-space model for track-query propagation"};
  app.require_subcommand(1);

  auto* config_cmd = app.add_subcommand("config", "Configuration utilities");
  config_cmd->require_subcommand(1);
  std::string init_out;
  auto* init_cmd = config_cmd->add_subcommand("init", "Print (or write) the full default config");
  init_cmd->add_option("--out", init_out, "Write to this file instead of stdout");

  Common gc, bc, tc, ec, sc;
  bool corrupt = false, ablation = false;
  std::vector<std::string> only;
  std::string checkpoint;

  auto* grad_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  add_common(grad_cmd, gc);
  grad_cmd->add_flag("--corrupt-fixture", corrupt, "Include a group with a deliberately wrong backward rule");
  grad_cmd->add_option("--only", only, "Restrict to families: ops ssm sync unit train_step");

  auto* bench_cmd = app.add_subcommand("bench", "Set-step scaling in T and k");
  add_common(bench_cmd, bc);

  auto* train_cmd = app.add_subcommand("train", "Train propagation parameters");
  add_common(train_cmd, tc);
  train_cmd->add_flag("--ablation", ablation, "Train and evaluate sync on/off x maskobs/freeze");

  auto* eval_cmd = app.add_subcommand("eval", "Track held-out scenes and score them");
  add_common(eval_cmd, ec);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to load (untrained model when omitted)");

  auto* sim_cmd = app.add_subcommand("simulate", "Write training and held-out scenes");
  add_common(sim_cmd, sc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*init_cmd) return cmd_config_init(init_out);
    if (*grad_cmd) return cmd_gradcheck(gc, corrupt, only);
    if (*bench_cmd) return cmd_bench(bc);
    if (*train_cmd) return cmd_train(tc, ablation);
    if (*eval_cmd) return cmd_eval(ec, checkpoint);
    if (*sim_cmd) return cmd_simulate(sc);
  } catch (const samba::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
