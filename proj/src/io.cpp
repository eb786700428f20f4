#include "samba/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

#include <json.hpp>

namespace samba::io {

namespace {

using json = nlohmann::ordered_json;

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("scene file: box must be [cx, cy, w, h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  validate(b);
  return b;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

std::vector<json> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_scene(const sim::SyntheticScene& scene, const std::string& gt_path, const std::string& det_path) {
  std::ofstream gt = open_out(gt_path), det = open_out(det_path);
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    const sim::Frame& f = scene.frames[t];
    json objects = json::array();
    for (const sim::GroundTruth& g : f.objects) {
      objects.push_back({{"id", g.id},
                         {"group", g.group},
                         {"box", box_json(g.box)},
                         {"visible", g.visible},
                         {"emb_clean", g.emb_clean}});
    }
    gt << json{{"frame", t}, {"objects", objects}}.dump() << '\n';
    json dets = json::array();
    for (const Detection& d : f.detections) {
      dets.push_back({{"emb", d.emb}, {"box", box_json(d.box)}, {"conf", d.conf}, {"gt_id", d.gt_id}});
    }
    det << json{{"frame", t}, {"detections", dets}}.dump() << '\n';
  }
  if (!gt || !det) throw Error("failed writing scene files");
}

sim::SyntheticScene read_scene(const std::string& gt_path, const std::string& det_path) {
  const std::vector<json> gt = read_lines(gt_path), det = read_lines(det_path);
  if (gt.size() != det.size()) throw Error("scene files disagree on the number of frames");
  sim::SyntheticScene scene;
  scene.frames.resize(gt.size());
  try {
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (gt[t].at("frame").get<std::size_t>() != t || det[t].at("frame").get<std::size_t>() != t) {
        throw Error("scene files: frames out of order at line " + std::to_string(t + 1));
      }
      sim::Frame& f = scene.frames[t];
      for (const json& o : gt[t].at("objects")) {
        sim::GroundTruth g;
        g.id = o.at("id").get<std::int64_t>();
        g.group = o.at("group").get<std::size_t>();
        g.box = box_from(o.at("box"));
        g.visible = o.at("visible").get<bool>();
        g.emb_clean = o.at("emb_clean").get<std::vector<double>>();
        f.objects.push_back(std::move(g));
      }
      for (const json& o : det[t].at("detections")) {
        Detection d;
        d.emb = o.at("emb").get<std::vector<double>>();
        d.box = box_from(o.at("box"));
        d.conf = o.at("conf").get<double>();
        d.gt_id = o.at("gt_id").get<std::int64_t>();
        f.detections.push_back(std::move(d));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scene files: ") + e.what());
  }
  return scene;
}

void write_tracks_csv(const FrameRecords& records, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "frame,id,cx,cy,w,h,conf,status\n";
  for (const auto& frame : records) {
    for (const propagation::TrackRecord& r : frame) {
      out << r.frame << ',' << r.id << ',' << r.box.cx << ',' << r.box.cy << ',' << r.box.w << ','
          << r.box.h << ',' << r.conf << ',' << propagation::to_string(r.status) << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path);
}

void write_tracks_jsonl(const FrameRecords& records, const std::string& path) {
  std::ofstream out = open_out(path);
  for (std::size_t t = 0; t < records.size(); ++t) {
    json tracks = json::array();
    for (const propagation::TrackRecord& r : records[t]) {
      tracks.push_back({{"id", r.id},
                        {"box", box_json(r.box)},
                        {"conf", r.conf},
                        {"status", std::string(propagation::to_string(r.status))}});
    }
    out << json{{"frame", t}, {"tracks", tracks}}.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

void write_metrics_json(const metrics::Metrics& m, const std::string& path) {
  std::ofstream out = open_out(path);
  out << json{{"id_consistency", m.id_consistency},
              {"id_switches", m.id_switches},
              {"assoc_accuracy", m.assoc_accuracy},
              {"matches", m.matches}}
             .dump(2)
      << '\n';
  if (!out) throw Error("failed writing " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create directory " + dir);
}

}  // namespace samba::io
