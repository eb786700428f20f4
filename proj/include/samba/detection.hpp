#pragma once

#include <cstdint>
#include <vector>

namespace samba {

// Normalized center/size box.
struct Box {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

  bool operator==(const Box&) const = default;
};

// Throws samba::Error when a coordinate is non-finite or a size is negative.
void validate(const Box& box);

struct Detection {
  std::vector<double> emb;
  Box box;
  double conf = 0.0;
  // Ground-truth identity; evaluation only, never read by the tracker.
  std::int64_t gt_id = -1;
};

}  // namespace samba
