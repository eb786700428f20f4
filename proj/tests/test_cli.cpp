#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = SAMBA_CLI_PATH;

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "samba_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small and quick, D = 8.
fs::path small_config() {
  const fs::path p = workdir() / "small.json";
  std::ofstream(p) << R"({
  "model": {"d_model": 8, "expand": 1, "d_state": 2, "d_sync": 8, "n_heads": 2},
  "scene": {"emb_dim": 8, "frames": 20, "n_groups": 1, "members_per_group": 3},
  "train": {"steps_per_epoch": 3, "train_scenes": 2},
  "eval": {"scenes": 2}
})";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run("") != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("train --config " + (workdir() / "nope.json").string()) == 2);
  const fs::path bad = workdir() / "bad.json";
  std::ofstream(bad) << R"({"tracker": {"tau_mask": 0.5, "colour": 1}})";
  CHECK(run("eval --config " + bad.string()) == 2);
}

TEST_CASE("config init writes a loadable default") {
  const fs::path out = workdir() / "default.json";
  CHECK(run("config init --out " + out.string()) == 0);
  CHECK(read_all(out).find("\"sync_mode\": \"posterior\"") != std::string::npos);
  CHECK(run("eval --config " + out.string() + " --out " + (workdir() / "default_eval").string()) == 0);
}

TEST_CASE("eval on an untrained model is deterministic") {
  const fs::path cfg = small_config();
  const fs::path a = workdir() / "eval_a", b = workdir() / "eval_b";
  CHECK(run("eval --config " + cfg.string() + " --seed 5 --out " + a.string()) == 0);
  CHECK(run("eval --config " + cfg.string() + " --seed 5 --out " + b.string()) == 0);
  for (const char* f : {"metrics.json", "scene_0_tracks.csv", "scene_1_tracks.jsonl", "scene_1_metrics.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(read_all(a / f) == read_all(b / f));
  }
}

TEST_CASE("train, then eval from the checkpoint") {
  const fs::path cfg = small_config();
  const fs::path out = workdir() / "train";
  CHECK(run("train --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "model.samb"));
  CHECK(read_all(out / "loss.csv").rfind("step,epoch,loss,lr\n", 0) == 0);
  CHECK(run("eval --config " + cfg.string() + " --checkpoint " + (out / "model.samb").string() + " --out " +
            (workdir() / "eval_ckpt").string()) == 0);

  const fs::path junk = workdir() / "junk.samb";
  std::ofstream(junk) << "not a checkpoint";
  CHECK(run("eval --config " + cfg.string() + " --checkpoint " + junk.string()) == 2);
}

TEST_CASE("simulate writes scene files") {
  const fs::path out = workdir() / "sim";
  CHECK(run("simulate --config " + small_config().string() + " --out " + out.string()) == 0);
  bool any = false;
  for (const auto& e : fs::recursive_directory_iterator(out)) any |= e.path().extension() == ".jsonl";
  CHECK(any);
}

TEST_CASE("gradcheck exit codes") {
  CHECK(run("gradcheck --only ops") == 0);
  CHECK(run("gradcheck --only fixture --corrupt-fixture") == 1);
}
