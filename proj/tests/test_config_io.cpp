#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "samba/checkpoint.hpp"
#include "samba/config.hpp"
#include "samba/io.hpp"

using namespace samba;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "samba_tests";
  fs::create_directories(dir);
  return dir / name;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.d_model = 8;
  c.expand = 1;
  c.d_state = 2;
  c.d_sync = 8;
  c.n_heads = 2;
  return c;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_all(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("config round trip") {
  config::RunConfig cfg;
  cfg.seed = 7;
  cfg.model.d_state = 4;
  cfg.tracker.tau_assoc = 0.42;
  cfg.tracker.occlusion_strategy = propagation::OcclusionStrategy::freeze;
  cfg.model.sync_mode = sync::SyncMode::prior;
  cfg.scene.occlusion_len = {2, 5};
  cfg.train.lr_drop_epochs = {3, 6};
  cfg.train.frame_interval_range = {2, 4};
  cfg.bench.ks = {2, 4};
  cfg.output_dir = "elsewhere";
  const std::string text = config::serialize(cfg);
  const config::RunConfig back = config::parse(text);
  CHECK(config::serialize(back) == text);
  CHECK(back.seed == 7);
  CHECK(back.model.d_state == 4);
  CHECK(back.tracker.tau_assoc == 0.42);
  CHECK(back.tracker.occlusion_strategy == propagation::OcclusionStrategy::freeze);
  CHECK(back.model.sync_mode == sync::SyncMode::prior);
  CHECK(back.scene.occlusion_len == std::pair<std::size_t, std::size_t>{2, 5});
  CHECK(back.train.lr_drop_epochs == std::vector<std::size_t>{3, 6});
  CHECK(back.output_dir == "elsewhere");
}

TEST_CASE("config defaults and partial documents") {
  const config::RunConfig cfg = config::parse("{}");
  CHECK(cfg.tracker.n_miss == 35);
  CHECK(cfg.model.n_blocks == 2);
  CHECK(cfg.model.sync_mode == sync::SyncMode::posterior);
  CHECK(cfg.train.clip_len == 10);
  const config::RunConfig partial = config::parse(R"({"tracker": {"n_miss": 20}})");
  CHECK(partial.tracker.n_miss == 20);
  CHECK(partial.tracker.tau_det == 0.5);
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(config::parse(R"({"modle": {}})"), doctest::Contains("unknown key modle"), Error);
  CHECK_THROWS_WITH_AS(config::parse(R"({"model": {"d_modle": 16}})"), doctest::Contains("model.d_modle"), Error);
  CHECK_THROWS_AS(config::parse(R"({"model": {"d_model": -3}})"), Error);
  CHECK_THROWS_AS(config::parse(R"({"tracker": {"sync_mode": "sideways"}})"), Error);
  CHECK_THROWS_AS(config::parse(R"({"scene": {"box_size": [0.1]}})"), Error);
  CHECK_THROWS_AS(config::parse("{ not json"), Error);
  CHECK_THROWS_WITH_AS(config::parse(R"({"model": {"d_model": 16}})"), doctest::Contains("emb_dim"), Error);
  CHECK_THROWS_AS(config::load(scratch("does_not_exist.json").string()), Error);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(1);
  auto a = propagation::PropagationParams::init(tiny_model(), rng);
  for (double& w : a.w_sy.mutable_data()) w = std::normal_distribution<double>()(rng);
  const auto path = scratch("round.samb").string();
  io::save_checkpoint(path, a);
  CHECK(read_all(path).substr(0, 4) == "SAMB");

  Rng other(2);
  auto b = propagation::PropagationParams::init(tiny_model(), other);
  io::load_checkpoint(path, b);
  std::vector<std::vector<double>> va, vb;
  a.visit([&](const std::string&, Tensor& t) { va.emplace_back(t.data().begin(), t.data().end()); });
  b.visit([&](const std::string&, Tensor& t) { vb.emplace_back(t.data().begin(), t.data().end()); });
  CHECK(va == vb);
  CHECK(b.w_sy.requires_grad());
}

TEST_CASE("checkpoint errors") {
  Rng rng(3);
  auto p = propagation::PropagationParams::init(tiny_model(), rng);
  const auto good = scratch("good.samb");
  io::save_checkpoint(good.string(), p);
  const std::string bytes = read_all(good);

  const auto bad = scratch("bad.samb");
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  write_all(bad, corrupt);
  CHECK_THROWS_WITH_AS(io::load_checkpoint(bad.string(), p), doctest::Contains("magic"), Error);

  corrupt = bytes;
  corrupt[4] = 9;
  write_all(bad, corrupt);
  CHECK_THROWS_WITH_AS(io::load_checkpoint(bad.string(), p), doctest::Contains("version"), Error);

  write_all(bad, bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_WITH_AS(io::load_checkpoint(bad.string(), p), doctest::Contains("truncated"), Error);

  CHECK_THROWS_AS(io::load_checkpoint(scratch("missing.samb").string(), p), Error);

  // Different architecture.
  model::ModelConfig wide = tiny_model();
  wide.d_state = 3;
  Rng r2(4);
  auto q = propagation::PropagationParams::init(wide, r2);
  CHECK_THROWS_WITH_AS(io::load_checkpoint(good.string(), q), doctest::Contains("shape"), Error);
  model::ModelConfig deep = tiny_model();
  deep.n_blocks = 3;
  auto d = propagation::PropagationParams::init(deep, r2);
  CHECK_THROWS_WITH_AS(io::load_checkpoint(good.string(), d), doctest::Contains("missing"), Error);
  model::ModelConfig shallow = tiny_model();
  shallow.n_blocks = 1;
  auto s = propagation::PropagationParams::init(shallow, r2);
  CHECK_THROWS_AS(io::load_checkpoint(good.string(), s), Error);
}

TEST_CASE("scene files round trip") {
  sim::SceneConfig cfg;
  cfg.frames = 6;
  cfg.occlusion_rate = 0.3;
  cfg.emb_dim = 8;
  const auto scene = sim::generate_scene(cfg);
  const auto gt = scratch("gt.jsonl").string(), det = scratch("det.jsonl").string();
  io::write_scene(scene, gt, det);
  const auto back = io::read_scene(gt, det);
  REQUIRE(back.frames.size() == scene.frames.size());
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    REQUIRE(back.frames[t].objects.size() == scene.frames[t].objects.size());
    REQUIRE(back.frames[t].detections.size() == scene.frames[t].detections.size());
    for (std::size_t i = 0; i < scene.frames[t].objects.size(); ++i) {
      CHECK(back.frames[t].objects[i].box == scene.frames[t].objects[i].box);
      CHECK(back.frames[t].objects[i].visible == scene.frames[t].objects[i].visible);
      CHECK(back.frames[t].objects[i].emb_clean == scene.frames[t].objects[i].emb_clean);
    }
    for (std::size_t i = 0; i < scene.frames[t].detections.size(); ++i) {
      CHECK(back.frames[t].detections[i].emb == scene.frames[t].detections[i].emb);
      CHECK(back.frames[t].detections[i].conf == scene.frames[t].detections[i].conf);
      CHECK(back.frames[t].detections[i].gt_id == scene.frames[t].detections[i].gt_id);
    }
  }
  write_all(det, read_all(det).substr(0, 20));
  CHECK_THROWS_AS(io::read_scene(gt, det), Error);
}

TEST_CASE("track outputs") {
  io::FrameRecords recs(2);
  recs[0].push_back({0, 3, {0.5, 0.25, 0.1, 0.2}, 0.75, propagation::TrackStatus::active});
  recs[1].push_back({1, 3, {0.5, 0.25, 0.1, 0.2}, 0.25, propagation::TrackStatus::inactive});
  const auto csv = scratch("tracks.csv"), jsonl = scratch("tracks.jsonl");
  io::write_tracks_csv(recs, csv.string());
  io::write_tracks_jsonl(recs, jsonl.string());
  const std::string text = read_all(csv);
  CHECK(text.rfind("frame,id,cx,cy,w,h,conf,status\n", 0) == 0);
  CHECK(text.find("1,3,0.5,0.25,0.1") != std::string::npos);
  CHECK(text.find("inactive") != std::string::npos);
  const std::string lines = read_all(jsonl);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
  CHECK_THROWS_AS(io::write_tracks_csv(recs, "/proc/forbidden/tracks.csv"), Error);
}
