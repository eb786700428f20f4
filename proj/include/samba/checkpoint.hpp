#pragma once

// Binary checkpoints: magic "SAMB", u32 format version, then named tensors
// (u32 name length, name bytes, u32 rank, u64 extents, little-endian f64
// payload) until end of file.

#include <string>

#include "samba/propagation.hpp"

namespace samba::io {

inline constexpr char kCheckpointMagic[4] = {'S', 'A', 'M', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, propagation::PropagationParams& params);

// params must already have the checkpoint's architecture; every parameter is
// overwritten. Throws samba::Error on a bad magic, a version mismatch, a
// truncated file, or a missing, extra or misshapen tensor.
void load_checkpoint(const std::string& path, propagation::PropagationParams& params);

}  // namespace samba::io
