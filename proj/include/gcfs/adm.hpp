// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "gcfs/engine.hpp"
#include "gcfs/geometry.hpp"

namespace gcfs {

struct AdmConfig {
  double mic_spacing = 0.011;  // m
  double sample_rate = kSampleRate;
  double speed_of_sound = kSpeedOfSound;
  double beta_init = 0.5;
  double step_size = 0.01;
  double power_smoothing = 0.999;
  double epsilon = 1e-8;
  double eq_cutoff = 100.0;  // Hz
  std::size_t fd_taps = 32;
  bool adapt = true;
  bool equalize = true;

  /// Acoustic travel time between the two microphones, in samples.
  double delay_samples() const { return mic_spacing / speed_of_sound * sample_rate; }

  void validate() const {
    if (!(mic_spacing > 0.0)) throw ConfigError("ADM microphone spacing must be positive");
    if (delay_samples() > 10.0)
      throw ConfigError("ADM spacing implies an inter-mic delay above 10 samples");
    if (!(beta_init >= 0.0 && beta_init <= 1.0)) throw ConfigError("ADM beta_init must lie in [0,1]");
    if (!(step_size > 0.0)) throw ConfigError("ADM step size must be positive");
    if (!(power_smoothing > 0.0 && power_smoothing < 1.0))
      throw ConfigError("ADM power smoothing must lie in (0,1)");
    if (!(eq_cutoff > 0.0 && eq_cutoff < sample_rate / 2.0))
      throw ConfigError("ADM equalizer cutoff out of range");
    if (fd_taps < 8 || fd_taps % 2 != 0) throw ConfigError("fractional delay needs an even tap count >= 8");
  }
};

/// Low-frequency null direction of y = cF - beta * cB, in degrees.
inline double adm_null_angle(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
  return rad2deg(std::acos((beta - 1.0) / (beta + 1.0)));
}

namespace detail {

inline double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

/// Kaiser-windowed sinc interpolator delaying by `delay` samples (DC gain 1).
inline std::vector<double> fractional_delay_taps(std::size_t taps, double delay, double kaiser_beta = 8.0) {
  std::vector<double> h(taps);
  const double half = static_cast<double>(taps) / 2.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - delay;
    const double r = t / half;
    const double win = std::abs(r) < 1.0 ? bessel_i0(kaiser_beta * std::sqrt(1.0 - r * r)) / bessel_i0(kaiser_beta) : 0.0;
    const double s = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    h[k] = s * win;
    sum += h[k];
  }
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace detail

/// One side of the bilateral ADM: front/back pair in, one sample out.
class AdmSide {
 public:
  explicit AdmSide(const AdmConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const double T = cfg_.delay_samples();
    bulk_ = static_cast<std::size_t>(
        std::floor((static_cast<double>(cfg_.fd_taps) - 1.0) / 2.0 - T / 2.0 + 0.5));
    taps_ = detail::fractional_delay_taps(cfg_.fd_taps, static_cast<double>(bulk_) + T);
    // One-pole lowpass with DC gain chosen so that the on-axis response of the
    // differential pair is unity well above the cutoff.
    pole_ = std::exp(-2.0 * kPi * cfg_.eq_cutoff / cfg_.sample_rate);
    const double T_sec = cfg_.mic_spacing / cfg_.speed_of_sound;
    eq_gain_ = (1.0 - pole_) / (4.0 * kPi * T_sec * cfg_.eq_cutoff);
    reset();
  }

  void reset() {
    front_.assign(cfg_.fd_taps, 0.0);
    back_.assign(cfg_.fd_taps, 0.0);
    pos_ = 0;
    beta_ = cfg_.beta_init;
    power_ = 0.0;
    eq_state_ = 0.0;
    last_raw_ = 0.0;
  }

  double step(double front, double back) {
    const std::size_t N = cfg_.fd_taps;
    pos_ = (pos_ + N - 1) % N;  // newest sample at pos_
    front_[pos_] = front;
    back_[pos_] = back;

    double front_frac = 0.0, back_frac = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const std::size_t i = (pos_ + k) % N;
      front_frac += taps_[k] * front_[i];
      back_frac += taps_[k] * back_[i];
    }
    const std::size_t ib = (pos_ + bulk_) % N;
    const double cf = front_[ib] - back_frac;
    const double cb = back_[ib] - front_frac;
    const double y = cf - beta_ * cb;
    last_raw_ = y;

    if (cfg_.adapt) {
      power_ = cfg_.power_smoothing * power_ + (1.0 - cfg_.power_smoothing) * cb * cb;
      beta_ += cfg_.step_size * y * cb / (cfg_.epsilon + power_);
      beta_ = std::clamp(beta_, 0.0, 1.0);
    }
    if (!cfg_.equalize) return y;
    eq_state_ = pole_ * eq_state_ + eq_gain_ * y;
    return eq_state_;
  }

  double beta() const { return beta_; }
  void set_beta(double b) { beta_ = std::clamp(b, 0.0, 1.0); }
  /// Unequalized output of the most recent step.
  double last_raw() const { return last_raw_; }
  /// Integer part of the interpolator delay; output latency in samples.
  std::size_t latency() const { return bulk_; }

 private:
  AdmConfig cfg_;
  std::vector<double> taps_;
  std::size_t bulk_ = 0;
  double pole_ = 0.0, eq_gain_ = 1.0;
  std::vector<double> front_, back_;
  std::size_t pos_ = 0;
  double beta_ = 0.0, power_ = 0.0, eq_state_ = 0.0, last_raw_ = 0.0;
};

/// Bilateral ADM: independent left (FL, BL) and right (FR, BR) instances.
class AdmProcessor final : public FrameProcessor {
 public:
  explicit AdmProcessor(AdmConfig cfg = {}) : cfg_(cfg), sides_{AdmSide(cfg), AdmSide(cfg)} {}

  std::string name() const override { return "adm"; }
  std::size_t latency() const override { return sides_[0].latency(); }
  bool adaptive() const override { return true; }
  void reset() override {
    for (auto& s : sides_) s.reset();
  }

  void process_block(BlockIn in, BlockOut out) override {
    constexpr std::array<std::array<std::size_t, 2>, kNumEars> pairs{
        {{kFrontLeft, kBackLeft}, {kFrontRight, kBackRight}}};
    for (std::size_t e = 0; e < kNumEars; ++e)
      for (std::size_t n = 0; n < out[e].size(); ++n)
        out[e][n] = sides_[e].step(in[pairs[e][0]][n], in[pairs[e][1]][n]);
  }

  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<AdmProcessor>(cfg_);
  }

  const AdmSide& side(std::size_t e) const { return sides_[e]; }
  AdmSide& side(std::size_t e) { return sides_[e]; }
  const AdmConfig& config() const { return cfg_; }

 private:
  AdmConfig cfg_;
  std::array<AdmSide, kNumEars> sides_;
};

}  // namespace gcfs
