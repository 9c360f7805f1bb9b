#pragma once

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "didfuse/codec.hpp"
#include "didfuse/config.hpp"
#include "didfuse/net.hpp"

namespace didfuse {

// Layout (all integers little-endian u32):
//   "DIDFUSE\0"  format_version
//   config_len   config text (serialize_config)
//   tensor_count { name_len name rank dims[rank] float32[prod(dims)] }*
//   crc32 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'D', 'I', 'D', 'F', 'U', 'S', 'E', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = kModelFormatVersion;

struct Checkpoint {
  ModelParams<float> params;
  TrainConfig config;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::size_t end, std::string name)
      : bytes_(b), end_(end), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  [[nodiscard]] bool at_end() const { return pos_ == end_; }
  void seek(std::size_t p) { pos_ = p; }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError(name_ + ": corrupt checkpoint: " + why);
  }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) fail("unexpected end of data");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::size_t end_;
  std::string name_;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<float> values;
};

inline std::vector<NamedArray> named_arrays(ModelParams<float>& p) {
  std::vector<NamedArray> out;
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    const std::string n = kLayers[l].name;
    auto& layer = p.layers[l];
    const auto oc = static_cast<std::uint32_t>(kLayers[l].out_channels);
    const auto ic = static_cast<std::uint32_t>(kLayers[l].in_channels);
    out.push_back({n + ".kernel", {oc, ic, 3, 3}, layer.kernel.data()});
    out.push_back({n + ".bias", {oc}, layer.bias});
    out.push_back({n + ".bn_gamma", {oc}, layer.bn.gamma});
    out.push_back({n + ".bn_beta", {oc}, layer.bn.beta});
    out.push_back({n + ".bn_running_mean", {oc}, layer.bn.running_mean});
    out.push_back({n + ".bn_running_var", {oc}, layer.bn.running_var});
    if (kLayers[l].activation == Activation::PReLU) out.push_back({n + ".prelu_slope", {1}, layer.prelu_slope});
  }
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>& params, const TrainConfig& config) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(serialize_config(config));
  ModelParams<float> copy = params;
  auto arrays = detail::named_arrays(copy);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) w.u32(d);
    for (float v : a.values) w.f32(v);
  }
  w.u32(detail::crc32_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>") {
  if (bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw DataError(name + ": not a checkpoint file");
  }
  detail::ByteReader r(bytes, bytes.size() - 4, name);
  r.seek(sizeof kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(name + ": unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  if (stored != detail::crc32_of(bytes.data(), bytes.size() - 4)) {
    throw DataError(name + ": checkpoint checksum mismatch (file is corrupt)");
  }

  Checkpoint ck;
  std::istringstream cfg(r.str());
  ck.config = parse_config(cfg);
  ck.params = zero_params<float>();
  ck.params.format_version = static_cast<int>(version);
  auto arrays = detail::named_arrays(ck.params);
  if (r.u32() != arrays.size()) r.fail("unexpected tensor count");
  for (const auto& a : arrays) {
    if (r.str() != a.name) r.fail("expected tensor " + a.name);
    if (r.u32() != a.dims.size()) r.fail("bad rank for " + a.name);
    for (auto d : a.dims) {
      if (r.u32() != d) r.fail("bad shape for " + a.name);
    }
    for (float& v : a.values) {
      v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite value in " + a.name);
    }
    if (a.name.ends_with(".bn_running_var")) {
      for (float v : a.values) {
        if (!(v > 0.0f)) r.fail("non-positive running variance in " + a.name);
      }
    }
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return ck;
}

inline void save_checkpoint(const ModelParams<float>& params, const TrainConfig& config,
                            const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(params, config));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace didfuse
