// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gcfs/audio.hpp"

namespace gcfs {

enum class WavFormat { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_tag(std::vector<std::uint8_t>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

}  // namespace detail

/// Reads 16-bit PCM or 32-bit IEEE float WAV (plain or extensible header).
inline MultichannelAudio read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  const std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  for (std::size_t pos = 12; pos + 8 <= b.size();) {
    const std::uint32_t len = detail::le32(&b[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > b.size()) throw IoError("truncated WAV chunk in " + path);
    if (std::memcmp(&b[pos], "fmt ", 4) == 0) {
      if (len < 16) throw IoError("short fmt chunk in " + path);
      format = detail::le16(&b[body]);
      channels = detail::le16(&b[body + 2]);
      rate = detail::le32(&b[body + 4]);
      bits = detail::le16(&b[body + 14]);
      if (format == 0xFFFE && len >= 26) format = detail::le16(&b[body + 24]);
    } else if (std::memcmp(&b[pos], "data", 4) == 0) {
      data = &b[body];
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || data == nullptr) throw IoError("WAV file lacks fmt or data chunk: " + path);
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) throw IoError("unsupported WAV encoding (need PCM16 or float32): " + path);

  const std::size_t bytes = bits / 8;
  const std::size_t frames = data_len / (bytes * channels);
  MultichannelAudio audio(channels, frames, static_cast<double>(rate));
  for (std::size_t n = 0; n < frames; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (n * channels + c) * bytes;
      audio(c, n) = pcm16 ? static_cast<double>(static_cast<std::int16_t>(detail::le16(p))) / 32768.0
                          : static_cast<double>(std::bit_cast<float>(detail::le32(p)));
    }
  return audio;
}

inline void write_wav(const std::string& path, const MultichannelAudio& audio,
                      WavFormat fmt = WavFormat::kFloat32) {
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels());
  const std::uint16_t bits = fmt == WavFormat::kPcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate()));
  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.frames() * channels * (bits / 8));

  std::vector<std::uint8_t> b;
  b.reserve(44 + data_len);
  detail::put_tag(b, "RIFF");
  detail::put32(b, 36 + data_len);
  detail::put_tag(b, "WAVE");
  detail::put_tag(b, "fmt ");
  detail::put32(b, 16);
  detail::put16(b, fmt == WavFormat::kPcm16 ? 1 : 3);
  detail::put16(b, channels);
  detail::put32(b, rate);
  detail::put32(b, rate * channels * (bits / 8));
  detail::put16(b, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::put16(b, bits);
  detail::put_tag(b, "data");
  detail::put32(b, data_len);
  for (std::size_t n = 0; n < audio.frames(); ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = audio(c, n);
      if (fmt == WavFormat::kPcm16) {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        detail::put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
      } else {
        detail::put32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gcfs
