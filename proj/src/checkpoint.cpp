#include "samba/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace samba::io {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("checkpoint " + path + ": truncated");
  return v;
}

struct Stored {
  Shape shape;
  std::vector<double> data;
};

}  // namespace

void save_checkpoint(const std::string& path, propagation::PropagationParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  params.visit([&](const std::string& name, Tensor& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  });
  if (!out) throw Error("failed writing checkpoint " + path);
}

void load_checkpoint(const std::string& path, propagation::PropagationParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error("checkpoint " + path + ": bad magic (not a SAMB file)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint " + path + ": format version " + std::to_string(version) + ", expected " +
                std::to_string(kCheckpointVersion));
  }
  std::map<std::string, Stored> stored;
  while (in.peek() != std::ifstream::traits_type::eof()) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > (1u << 16)) throw Error("checkpoint " + path + ": implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error("checkpoint " + path + ": truncated");
    Stored s;
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw Error("checkpoint " + path + ": implausible rank for " + name);
    for (std::uint32_t i = 0; i < rank; ++i) s.shape.push_back(get<std::uint64_t>(in, path));
    s.data.resize(numel(s.shape));
    if (!in.read(reinterpret_cast<char*>(s.data.data()),
                 static_cast<std::streamsize>(s.data.size() * sizeof(double)))) {
      throw Error("checkpoint " + path + ": truncated payload for " + name);
    }
    for (double v : s.data)
      if (!std::isfinite(v)) throw Error("checkpoint " + path + ": non-finite value in " + name);
    if (!stored.emplace(name, std::move(s)).second) throw Error("checkpoint " + path + ": duplicate " + name);
  }
  std::size_t used = 0;
  params.visit([&](const std::string& name, Tensor& t) {
    auto it = stored.find(name);
    if (it == stored.end()) throw Error("checkpoint " + path + ": missing tensor " + name);
    if (it->second.shape != t.shape()) {
      throw Error("checkpoint " + path + ": " + name + " has shape " + to_string(it->second.shape) +
                  ", model expects " + to_string(t.shape()));
    }
    std::span<double> dst = t.mutable_data();
    std::copy(it->second.data.begin(), it->second.data.end(), dst.begin());
    ++used;
  });
  if (used != stored.size()) throw Error("checkpoint " + path + ": contains tensors the model does not have");
}

}  // namespace samba::io
