#pragma once

// Binary checkpoint container. Layout, all integers little-endian:
//
//   "GNM1"
//   u32 metadata length, metadata bytes (sorted "key=value\n" lines)
//   u32 tensor count
//   per tensor: u32 name length, name, u32 rank, u64 extents[rank],
//               float32 values (IEEE 754, little-endian)
//
// Tensors are written in name order so that equal contents give equal bytes.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "inkgan/errors.hpp"
#include "inkgan/tensor.hpp"

namespace inkgan {

inline constexpr std::string_view kCheckpointMagic = "GNM1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor> tensors;

  const std::string& meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw FormatError("checkpoint metadata lacks '" + key + "'");
    return it->second;
  }

  const Tensor& tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    return it->second;
  }
};

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated checkpoint");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string meta;
  auto metadata = ckpt.metadata;
  metadata["format_version"] = std::to_string(kCheckpointVersion);
  for (const auto& [k, v] : metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError("checkpoint metadata entry '" + k + "' contains a reserved character");
    }
    meta += k + "=" + v + "\n";
  }
  std::string out(kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) detail::put_le<std::uint64_t>(out, e);
    for (float v : t.values()) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::Reader in(bytes);
  if (bytes.size() < kCheckpointMagic.size() || in.take(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  const auto meta_len = in.le<std::uint32_t>();
  std::istringstream meta{std::string(in.take(meta_len))};
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed checkpoint metadata line '" + line + "'");
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto version = ckpt.metadata.find("format_version");
  if (version == ckpt.metadata.end() || version->second != std::to_string(kCheckpointVersion)) {
    throw FormatError("unsupported checkpoint format version '" +
                      (version == ckpt.metadata.end() ? std::string("none") : version->second) + "'");
  }
  const auto count = in.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(in.take(in.le<std::uint32_t>()));
    const auto rank = in.le<std::uint32_t>();
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& e : shape) {
      e = in.le<std::uint64_t>();
      n *= e;
      if (n > (std::uint64_t{1} << 34)) throw FormatError("tensor '" + name + "' is implausibly large");
    }
    if (n * 4 > bytes.size()) throw FormatError("truncated checkpoint");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(in.le<std::uint32_t>());
    if (!ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      throw FormatError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace inkgan
