#include "samba/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

namespace samba::config {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads known keys from one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw Error("config: unknown key " + where(item.key()));
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    check<T>(*it, key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error("config: " + where(key) + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = parse(s);
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, where(key));
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void check(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error("config: " + where(key) + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw Error("config: " + where(key) + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error("config: " + where(key) + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error("config: " + where(key) + " must be a string");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw Error("config: " + where(key) + " must be an array");
      for (const json& e : v)
        if (!e.is_number_unsigned()) throw Error("config: " + where(key) + " entries must be non-negative integers");
    } else {
      // Pairs.
      if (!v.is_array() || v.size() != 2) throw Error("config: " + where(key) + " must be a 2-element array");
      using E = typename T::first_type;
      for (const json& e : v) {
        if (std::is_integral_v<E> ? !e.is_number_unsigned() : !e.is_number()) {
          throw Error("config: " + where(key) + " has a malformed entry");
        }
      }
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read(Section s, model::ModelConfig& m) {
  s.get("d_model", m.d_model);
  s.get("expand", m.expand);
  s.get("d_state", m.d_state);
  s.get("d_conv", m.d_conv);
  s.get("n_blocks", m.n_blocks);
  s.get("n_sync", m.n_sync);
  s.get("d_sync", m.d_sync);
  s.get("n_heads", m.n_heads);
  s.get("dt_rank", m.dt_rank);
}

void read(Section s, propagation::TrackerConfig& t, model::ModelConfig& m) {
  s.get("tau_det", t.tau_det);
  s.get("tau_track", t.tau_track);
  s.get("tau_mask", t.tau_mask);
  s.get("tau_assoc", t.tau_assoc);
  s.get("n_miss", t.n_miss);
  s.get("use_pe", t.use_pe);
  s.get_enum("residual_update", t.residual_update, propagation::parse_residual_update);
  s.get_enum("occlusion_strategy", t.occlusion_strategy, propagation::parse_occlusion_strategy);
  s.get_enum("sync_mode", m.sync_mode, sync::parse_sync_mode);
}

void read(Section s, sim::SceneConfig& c) {
  s.get("n_groups", c.n_groups);
  s.get("members_per_group", c.members_per_group);
  s.get("frames", c.frames);
  s.get("group_amplitude", c.group_amplitude);
  s.get("group_frequency", c.group_frequency);
  s.get("orbit_radius", c.orbit_radius);
  s.get("box_size", c.box_size);
  s.get("occlusion_rate", c.occlusion_rate);
  s.get("occlusion_len", c.occlusion_len);
  s.get("drop_occluded", c.drop_occluded);
  s.get("emb_dim", c.emb_dim);
  s.get("emb_scale", c.emb_scale);
  s.get("group_emb_share", c.group_emb_share);
  s.get("emb_drift", c.emb_drift);
  s.get("emb_noise_sigma", c.emb_noise_sigma);
  s.get("box_noise_sigma", c.box_noise_sigma);
  s.get("conf_visible_range", c.conf_visible_range);
  s.get("conf_occluded_range", c.conf_occluded_range);
  s.get("seed", c.seed);
}

void read(Section s, train::TrainConfig& c) {
  s.get("clip_len", c.clip_len);
  s.get("grad_frames", c.grad_frames);
  s.get("frame_interval_range", c.frame_interval_range);
  s.get("lr", c.lr);
  s.get("lr_drop_epochs", c.lr_drop_epochs);
  s.get("epochs", c.epochs);
  s.get("steps_per_epoch", c.steps_per_epoch);
  s.get("weight_decay", c.weight_decay);
  s.get("adam_betas", c.adam_betas);
  s.get("adam_eps", c.adam_eps);
  s.get("grad_clip_norm", c.grad_clip_norm);
  s.get("batch_scenes", c.batch_scenes);
  s.get("train_scenes", c.train_scenes);
  s.get("seed", c.seed);
}

template <typename P>
ojson pair_json(const P& p) {
  return ojson::array({p.first, p.second});
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  scene.validate(tracker.tau_mask, tracker.tau_track);
  if (scene.emb_dim != model.d_model) {
    throw Error("config: scene.emb_dim (" + std::to_string(scene.emb_dim) + ") must equal model.d_model (" +
                std::to_string(model.d_model) + ")");
  }
  if (model.d_model % 8 != 0 && tracker.use_pe) {
    throw Error("config: model.d_model must be a multiple of 8 when tracker.use_pe is set");
  }
  for (double tau : {tracker.tau_det, tracker.tau_track, tracker.tau_mask}) {
    if (tau < 0.0 || tau > 1.0) throw Error("config: tracker thresholds must lie in [0, 1]");
  }
  if (tracker.tau_assoc < -1.0 || tracker.tau_assoc > 1.0) throw Error("config: tracker.tau_assoc must lie in [-1, 1]");
  if (eval.scenes == 0) throw Error("config: eval.scenes must be >= 1");
  if (bench.lengths.empty() || bench.ks.empty() || bench.k_for_lengths == 0 || bench.length_for_ks == 0) {
    throw Error("config: bench sizes must be non-empty and positive");
  }
  for (std::size_t v : bench.lengths)
    if (v == 0) throw Error("config: bench.lengths must be positive");
  for (std::size_t v : bench.ks)
    if (v == 0) throw Error("config: bench.ks must be positive");
  if (output_dir.empty()) throw Error("config: output.dir must not be empty");
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  scene.seed = s;
}

RunConfig parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig cfg;
  {
    Section root(j, "");
    root.get("seed", cfg.seed);
    read(root.sub("model"), cfg.model);
    read(root.sub("tracker"), cfg.tracker, cfg.model);
    read(root.sub("scene"), cfg.scene);
    read(root.sub("train"), cfg.train);
    {
      Section e = root.sub("eval");
      e.get("first_seed", cfg.eval.first_seed);
      e.get("scenes", cfg.eval.scenes);
    }
    {
      Section b = root.sub("bench");
      b.get("lengths", cfg.bench.lengths);
      b.get("ks", cfg.bench.ks);
      b.get("k_for_lengths", cfg.bench.k_for_lengths);
      b.get("length_for_ks", cfg.bench.length_for_ks);
    }
    {
      Section o = root.sub("output");
      o.get("dir", cfg.output_dir);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string serialize(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  const model::ModelConfig& m = c.model;
  j["model"] = {{"d_model", m.d_model}, {"expand", m.expand},   {"d_state", m.d_state},
                {"d_conv", m.d_conv},   {"n_blocks", m.n_blocks}, {"n_sync", m.n_sync},
                {"d_sync", m.d_sync},   {"n_heads", m.n_heads}, {"dt_rank", m.dt_rank}};
  const propagation::TrackerConfig& t = c.tracker;
  j["tracker"] = {{"tau_det", t.tau_det},
                  {"tau_track", t.tau_track},
                  {"tau_mask", t.tau_mask},
                  {"tau_assoc", t.tau_assoc},
                  {"n_miss", t.n_miss},
                  {"use_pe", t.use_pe},
                  {"residual_update", std::string(propagation::to_string(t.residual_update))},
                  {"occlusion_strategy", std::string(propagation::to_string(t.occlusion_strategy))},
                  {"sync_mode", std::string(sync::to_string(m.sync_mode))}};
  const sim::SceneConfig& s = c.scene;
  j["scene"] = {{"n_groups", s.n_groups},
                {"members_per_group", s.members_per_group},
                {"frames", s.frames},
                {"group_amplitude", pair_json(s.group_amplitude)},
                {"group_frequency", pair_json(s.group_frequency)},
                {"orbit_radius", s.orbit_radius},
                {"box_size", pair_json(s.box_size)},
                {"occlusion_rate", s.occlusion_rate},
                {"occlusion_len", pair_json(s.occlusion_len)},
                {"drop_occluded", s.drop_occluded},
                {"emb_dim", s.emb_dim},
                {"emb_scale", s.emb_scale},
                {"group_emb_share", s.group_emb_share},
                {"emb_drift", s.emb_drift},
                {"emb_noise_sigma", s.emb_noise_sigma},
                {"box_noise_sigma", s.box_noise_sigma},
                {"conf_visible_range", pair_json(s.conf_visible_range)},
                {"conf_occluded_range", pair_json(s.conf_occluded_range)},
                {"seed", s.seed}};
  const train::TrainConfig& r = c.train;
  j["train"] = {{"clip_len", r.clip_len},
                {"grad_frames", r.grad_frames},
                {"frame_interval_range", pair_json(r.frame_interval_range)},
                {"lr", r.lr},
                {"lr_drop_epochs", r.lr_drop_epochs},
                {"epochs", r.epochs},
                {"steps_per_epoch", r.steps_per_epoch},
                {"weight_decay", r.weight_decay},
                {"adam_betas", pair_json(r.adam_betas)},
                {"adam_eps", r.adam_eps},
                {"grad_clip_norm", r.grad_clip_norm},
                {"batch_scenes", r.batch_scenes},
                {"train_scenes", r.train_scenes},
                {"seed", r.seed}};
  j["eval"] = {{"first_seed", c.eval.first_seed}, {"scenes", c.eval.scenes}};
  j["bench"] = {{"lengths", c.bench.lengths},
                {"ks", c.bench.ks},
                {"k_for_lengths", c.bench.k_for_lengths},
                {"length_for_ks", c.bench.length_for_ks}};
  j["output"] = {{"dir", c.output_dir}};
  return j.dump(2) + "\n";
}

}  // namespace samba::config
