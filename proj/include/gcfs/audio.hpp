// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcfs {

/// Base of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments, shape mismatches, invalid configurations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system and format errors (WAV, weight containers, scene files).
class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSampleRate = 16000.0;
inline constexpr double kSpeedOfSound = 343.0;
inline constexpr double kPi = 3.14159265358979323846;

/// Microphone roles in engine channel order.
enum Mic : std::size_t { kFrontLeft = 0, kFrontRight = 1, kBackLeft = 2, kBackRight = 3 };
inline constexpr std::size_t kNumMics = 4;

/// Planar multichannel buffer. Every channel holds the same number of samples.
class MultichannelAudio {
 public:
  MultichannelAudio() = default;
  MultichannelAudio(std::size_t channels, std::size_t frames,
                    double sample_rate = kSampleRate)
      : sample_rate_(sample_rate), data_(channels, std::vector<double>(frames, 0.0)) {}

  static MultichannelAudio from_channels(std::vector<std::vector<double>> channels,
                                         double sample_rate = kSampleRate) {
    MultichannelAudio out;
    out.sample_rate_ = sample_rate;
    for (const auto& ch : channels) {
      if (ch.size() != channels.front().size())
        throw ConfigError("channels must have equal length");
    }
    out.data_ = std::move(channels);
    return out;
  }

  std::size_t channels() const { return data_.size(); }
  std::size_t frames() const { return data_.empty() ? 0 : data_.front().size(); }
  double sample_rate() const { return sample_rate_; }
  double seconds() const { return static_cast<double>(frames()) / sample_rate_; }

  std::span<double> channel(std::size_t c) { return data_.at(c); }
  std::span<const double> channel(std::size_t c) const { return data_.at(c); }
  std::vector<double>& vec(std::size_t c) { return data_.at(c); }
  const std::vector<double>& vec(std::size_t c) const { return data_.at(c); }

  double& operator()(std::size_t c, std::size_t n) { return data_[c][n]; }
  double operator()(std::size_t c, std::size_t n) const { return data_[c][n]; }

  void resize(std::size_t frames) {
    for (auto& ch : data_) ch.resize(frames, 0.0);
  }

  bool all_finite() const {
    for (const auto& ch : data_)
      for (double v : ch)
        if (!std::isfinite(v)) return false;
    return true;
  }

  /// Samples with magnitude above full scale.
  std::size_t count_clipped() const {
    std::size_t n = 0;
    for (const auto& ch : data_)
      for (double v : ch)
        if (std::abs(v) > 1.0) ++n;
    return n;
  }

  MultichannelAudio select(std::span<const std::size_t> idx) const {
    MultichannelAudio out;
    out.sample_rate_ = sample_rate_;
    for (auto i : idx) out.data_.push_back(data_.at(i));
    return out;
  }

  MultichannelAudio& operator+=(const MultichannelAudio& other) {
    if (other.channels() != channels() || other.frames() != frames())
      throw ConfigError("audio shape mismatch in addition");
    for (std::size_t c = 0; c < channels(); ++c)
      for (std::size_t n = 0; n < frames(); ++n) data_[c][n] += other.data_[c][n];
    return *this;
  }

  MultichannelAudio& operator*=(double g) {
    for (auto& ch : data_)
      for (double& v : ch) v *= g;
    return *this;
  }

  friend bool operator==(const MultichannelAudio&, const MultichannelAudio&) = default;

 private:
  double sample_rate_ = kSampleRate;
  std::vector<std::vector<double>> data_;
};

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double db_from_power_ratio(double r) { return 10.0 * std::log10(r); }
inline double amplitude_from_db(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace gcfs
