// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gcfs/gcfs_config.hpp"

namespace gcfs {

/// Structural problems in a weight container: bad magic, checksum, truncation,
/// unknown version, or a tensor set that does not match the configuration.
class WeightsError : public Error {
 public:
  using Error::Error;
};

enum class DType : std::uint8_t { kInt8 = 1, kInt16 = 2 };

inline constexpr std::int32_t quant_limit(DType t) { return t == DType::kInt8 ? 127 : 32767; }
inline constexpr std::size_t dtype_bytes(DType t) { return t == DType::kInt8 ? 1 : 2; }

/// Symmetric linear quantization of values in [-1, 1].
struct QuantTensor {
  std::string name;
  std::vector<std::size_t> shape;
  DType dtype = DType::kInt8;
  std::vector<std::int16_t> data;

  friend bool operator==(const QuantTensor&, const QuantTensor&) = default;
};

/// q = clamp(round(v * Q), -Q, Q), rounding half away from zero. Values
/// outside [-1, 1] are clamped and counted in `clamped`.
inline QuantTensor quantize(std::span<const double> values, DType dtype, std::string name = {},
                            std::vector<std::size_t> shape = {}, std::size_t* clamped = nullptr) {
  QuantTensor t;
  t.name = std::move(name);
  t.shape = shape.empty() ? std::vector<std::size_t>{values.size()} : std::move(shape);
  t.dtype = dtype;
  t.data.reserve(values.size());
  const double Q = quant_limit(dtype);
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("cannot quantize a non-finite value");
    if (std::abs(v) > 1.0 && clamped) ++*clamped;
    const double q = std::clamp(std::round(v * Q), -Q, Q);
    t.data.push_back(static_cast<std::int16_t>(q));
  }
  return t;
}

inline std::vector<double> dequantize(const QuantTensor& t) {
  const double Q = quant_limit(t.dtype);
  std::vector<double> out(t.data.size());
  std::transform(t.data.begin(), t.data.end(), out.begin(),
                 [Q](std::int16_t q) { return static_cast<double>(q) / Q; });
  return out;
}

/// Float-domain network parameters: the source the engine runs on and the
/// trainer exports.
struct GcfsParameters {
  GcfsConfig config;
  double input_scale = 1.0;
  double r = 2.0;
  std::map<std::string, std::vector<double>> tensors;

  static GcfsParameters zeros(const GcfsConfig& cfg) {
    cfg.validate();
    GcfsParameters p;
    p.config = cfg;
    for (const auto& s : tensor_layout(cfg)) p.tensors[s.name].assign(s.numel(), 0.0);
    return p;
  }

  /// Glorot-uniform weights and small biases, all within [-1, 1].
  static GcfsParameters random(const GcfsConfig& cfg, std::uint64_t seed) {
    GcfsParameters p = zeros(cfg);
    std::mt19937_64 rng(seed);
    for (const auto& s : tensor_layout(cfg)) {
      auto& v = p.tensors[s.name];
      double limit = 0.1;
      if (!s.is_bias) {
        const double fan_in = static_cast<double>(s.shape.front());
        const double fan_out = static_cast<double>(s.shape.size() > 1 ? s.shape[1] : 1);
        limit = std::min(1.0, std::sqrt(6.0 / (fan_in + fan_out)));
      }
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& x : v) x = dist(rng);
    }
    return p;
  }

  const std::vector<double>& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw WeightsError("missing tensor: " + name);
    return it->second;
  }
};

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr char kContainerMagic[4] = {'G', 'C', 'F', 'S'};
inline constexpr std::size_t kContainerHeaderSize = 20;

struct WeightContainer {
  std::uint32_t format_version = kContainerVersion;
  GcfsConfig config;
  /// Free-form metadata stored after the config keys (e.g. training constants).
  std::map<std::string, std::string> metadata;
  float input_scale = 1.0f;
  float r = 2.0f;
  std::vector<QuantTensor> tensors;

  friend bool operator==(const WeightContainer&, const WeightContainer&) = default;
};

/// Checks that the tensors cover the architecture of `wc.config` exactly, in
/// layout order, with matching shapes and dtypes.
inline void validate_container(const WeightContainer& wc) {
  try {
    wc.config.validate();
  } catch (const ConfigError& e) {
    throw WeightsError(std::string("invalid container config: ") + e.what());
  }
  const auto layout = tensor_layout(wc.config);
  std::set<std::string> seen;
  for (const auto& t : wc.tensors)
    if (!seen.insert(t.name).second) throw WeightsError("duplicate tensor: " + t.name);
  if (wc.tensors.size() != layout.size())
    throw WeightsError("tensor set does not match config: expected " + std::to_string(layout.size()) +
                       " tensors, found " + std::to_string(wc.tensors.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = wc.tensors[i];
    const auto& s = layout[i];
    if (t.name != s.name) throw WeightsError("unexpected tensor '" + t.name + "', expected '" + s.name + "'");
    if (t.shape != s.shape) throw WeightsError("shape mismatch for tensor " + t.name);
    if (t.dtype != (s.is_bias ? DType::kInt16 : DType::kInt8))
      throw WeightsError("dtype mismatch for tensor " + t.name);
    if (t.data.size() != s.numel()) throw WeightsError("size mismatch for tensor " + t.name);
    const std::int32_t Q = quant_limit(t.dtype);
    for (auto q : t.data)
      if (q < -Q || q > Q) throw WeightsError("value out of range in tensor " + t.name);
  }
  if (!std::isfinite(wc.input_scale) || !std::isfinite(wc.r) || !(wc.r > 0.0f))
    throw WeightsError("invalid scalar parameters");
}

/// Quantizes weights to int8 and biases to int16.
inline WeightContainer to_container(const GcfsParameters& p, std::size_t* clamped = nullptr) {
  WeightContainer wc;
  wc.config = p.config;
  wc.input_scale = static_cast<float>(p.input_scale);
  wc.r = static_cast<float>(p.r);
  for (const auto& s : tensor_layout(p.config)) {
    const auto& v = p.at(s.name);
    if (v.size() != s.numel()) throw WeightsError("size mismatch for tensor " + s.name);
    wc.tensors.push_back(quantize(v, s.is_bias ? DType::kInt16 : DType::kInt8, s.name, s.shape, clamped));
  }
  return wc;
}

inline GcfsParameters from_container(const WeightContainer& wc) {
  validate_container(wc);
  GcfsParameters p;
  p.config = wc.config;
  p.input_scale = wc.input_scale;
  p.r = wc.r;
  for (const auto& t : wc.tensors) p.tensors[t.name] = dequantize(t);
  return p;
}

/// Throws unless the container was produced for `expected`.
inline void check_compatible(const WeightContainer& wc, const GcfsConfig& expected) {
  if (!(wc.config == expected))
    throw WeightsError("weight container config (" + to_string(wc.config.variant) +
                       ") is incompatible with the engine config (" + to_string(expected.variant) + ")");
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw WeightsError("weight container is truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

/// Serializes to the little-endian `.gcfs` layout:
///   "GCFS" | u32 version | u64 payload size | u32 CRC-32 of payload | payload
/// payload = config block (u32 length + key=value lines) | f32 input_scale |
///   f32 r | u32 tensor count | tensors, each (u32 name length, name, u8 dtype,
///   u8 rank, u32 dims..., raw little-endian integers).
inline std::vector<std::uint8_t> encode_container(const WeightContainer& wc) {
  validate_container(wc);
  detail::ByteWriter p;
  std::string cfg = serialize_config(wc.config);
  for (const auto& [k, v] : wc.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw WeightsError("metadata keys/values must not contain '=' or newlines");
    cfg += k + "=" + v + "\n";
  }
  p.str(cfg);
  p.f32(wc.input_scale);
  p.f32(wc.r);
  p.u32(static_cast<std::uint32_t>(wc.tensors.size()));
  for (const auto& t : wc.tensors) {
    p.str(t.name);
    p.u8(static_cast<std::uint8_t>(t.dtype));
    p.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) p.u32(static_cast<std::uint32_t>(d));
    for (auto q : t.data) {
      if (t.dtype == DType::kInt8) p.u8(static_cast<std::uint8_t>(static_cast<std::int8_t>(q)));
      else p.u16(static_cast<std::uint16_t>(q));
    }
  }
  detail::ByteWriter out;
  for (char c : kContainerMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(wc.format_version);
  out.u64(p.bytes.size());
  out.u32(detail::crc32_of(p.bytes));
  out.bytes.insert(out.bytes.end(), p.bytes.begin(), p.bytes.end());
  return out.bytes;
}

inline WeightContainer decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kContainerHeaderSize) throw WeightsError("weight container is truncated");
  if (!std::equal(std::begin(kContainerMagic), std::end(kContainerMagic), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    throw WeightsError("bad magic: not a .gcfs weight container");
  detail::ByteReader h(bytes.subspan(4, kContainerHeaderSize - 4));
  WeightContainer wc;
  wc.format_version = h.u32();
  if (wc.format_version != kContainerVersion)
    throw WeightsError("unsupported container format version " + std::to_string(wc.format_version));
  const std::uint64_t size = h.u64();
  const std::uint32_t crc = h.u32();
  const auto payload = bytes.subspan(kContainerHeaderSize);
  if (payload.size() < size) throw WeightsError("weight container is truncated");
  if (payload.size() > size) throw WeightsError("trailing bytes after weight container payload");
  if (detail::crc32_of(payload) != crc) throw WeightsError("checksum mismatch in weight container");

  detail::ByteReader r(payload);
  try {
    wc.config = parse_config(r.str(), &wc.metadata);
  } catch (const ConfigError& e) {
    throw WeightsError(std::string("invalid config block: ") + e.what());
  }
  wc.input_scale = r.f32();
  wc.r = r.f32();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    QuantTensor t;
    t.name = r.str();
    const auto dtype = r.u8();
    if (dtype != 1 && dtype != 2) throw WeightsError("unknown dtype in tensor " + t.name);
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.u8();
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.u32());
      numel *= t.shape.back();
    }
    if (numel > payload.size()) throw WeightsError("weight container is truncated");
    t.data.resize(numel);
    for (auto& q : t.data)
      q = t.dtype == DType::kInt8 ? static_cast<std::int16_t>(static_cast<std::int8_t>(r.u8()))
                                  : static_cast<std::int16_t>(r.u16());
    wc.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw WeightsError("unexpected bytes after the last tensor");
  validate_container(wc);
  return wc;
}

inline void save_container(const std::string& path, const WeightContainer& wc) {
  const auto bytes = encode_container(wc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline WeightContainer load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace gcfs
