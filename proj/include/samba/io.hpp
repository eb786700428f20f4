#pragma once

// Scene and tracker-output files. Scenes are two JSON-lines streams with one
// frame per line: ground truth ({"frame", "objects": [...]}) and detections
// ({"frame", "detections": [...]}). Boxes are [cx, cy, w, h].

#include <string>
#include <vector>

#include "samba/metrics.hpp"
#include "samba/propagation.hpp"
#include "samba/simulator.hpp"

namespace samba::io {

void write_scene(const sim::SyntheticScene& scene, const std::string& gt_path, const std::string& det_path);
sim::SyntheticScene read_scene(const std::string& gt_path, const std::string& det_path);

using FrameRecords = std::vector<std::vector<propagation::TrackRecord>>;

// frame,id,cx,cy,w,h,conf,status
void write_tracks_csv(const FrameRecords& records, const std::string& path);
// One line per frame: {"frame", "tracks": [{"id", "box", "conf", "status"}]}
void write_tracks_jsonl(const FrameRecords& records, const std::string& path);

void write_metrics_json(const metrics::Metrics& m, const std::string& path);

// Creates the directory (and parents) or throws.
void ensure_dir(const std::string& dir);

}  // namespace samba::io
