// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcfs/engine.hpp"
#include "gcfs/geometry.hpp"

namespace gcfs {

using Vector4c = Eigen::Matrix<Complex, 4, 1>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;

/// Far-field steering vector exp(-j 2 pi f tau_m), normalized so that the
/// entry of `reference` is exactly 1.
inline Vector4c steering_vector(const ArrayGeometry& geom, double azimuth_deg, double freq_hz,
                                std::size_t reference = kFrontLeft) {
  Vector4c d;
  const double tau_ref = geom.plane_wave_delay(reference, azimuth_deg);
  for (std::size_t m = 0; m < kNumMics; ++m) {
    const double tau = geom.plane_wave_delay(m, azimuth_deg) - tau_ref;
    d(static_cast<Eigen::Index>(m)) = std::polar(1.0, -2.0 * kPi * freq_hz * tau);
  }
  d(static_cast<Eigen::Index>(reference)) = Complex(1.0, 0.0);
  return d;
}

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// Coherence matrix of a spherically isotropic noise field.
inline Matrix4c diffuse_covariance(const ArrayGeometry& geom, double freq_hz) {
  Matrix4c g;
  for (std::size_t i = 0; i < kNumMics; ++i)
    for (std::size_t j = 0; j < kNumMics; ++j) {
      const double kd = 2.0 * kPi * freq_hz * geom.distance(i, j) / geom.speed_of_sound;
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sinc(kd);
    }
  return g;
}

/// w = (G + dI)^-1 d / (d^H (G + dI)^-1 d). Throws when the loaded matrix is
/// numerically singular.
inline Vector4c mvdr_weights(const Vector4c& steer, const Matrix4c& coherence, double loading) {
  if (!(loading > 0.0)) throw ConfigError("diagonal loading must be positive");
  const Matrix4c loaded = coherence + loading * Matrix4c::Identity();
  Eigen::LLT<Matrix4c> llt(loaded);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
    throw ConfigError("MVDR solve failed: loaded coherence matrix is near-singular");
  const Vector4c num = llt.solve(steer);
  const Complex den = steer.dot(num);  // d^H R^-1 d
  return num / den;
}

struct MvdrConfig {
  double steer_azimuth = 0.0;
  double diagonal_loading = 0.01;
  std::array<std::size_t, kNumEars> reference{kFrontLeft, kFrontRight};
};

/// Per-bin acoustic transfer functions (one complex value per mic) replacing
/// the plane-wave steering model.
using AtfTable = std::vector<Vector4c>;

/// Reads an ATF table from CSV with header
/// `bin,re_fl,im_fl,re_fr,im_fr,re_bl,im_bl,re_br,im_br`, one row per bin.
inline AtfTable load_atf_csv(const std::string& path, std::size_t n_bins) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ATF file: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("bin,", 0) != 0) throw IoError("ATF file lacks the expected header: " + path);
  AtfTable table(n_bins, Vector4c::Zero());
  std::vector<bool> seen(n_bins, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 9) throw IoError("ATF row must have 9 columns: " + line);
    const auto k = static_cast<std::size_t>(v[0]);
    if (k >= n_bins || seen[k]) throw IoError("ATF row has invalid or duplicate bin: " + line);
    for (std::size_t m = 0; m < kNumMics; ++m)
      table[k](static_cast<Eigen::Index>(m)) = {v[1 + 2 * m], v[2 + 2 * m]};
    seen[k] = true;
  }
  for (bool s : seen)
    if (!s) throw IoError("ATF file does not cover all bins: " + path);
  return table;
}

/// Fixed binaural MVDR: one weight set per ear, sharing steering direction and
/// the diffuse noise model, differing only in the reference microphone.
class MvdrProcessor final : public SpectralProcessor {
 public:
  MvdrProcessor(ArrayGeometry geom, MvdrConfig cfg = {}, std::optional<AtfTable> atf = {},
                StftConfig stft = {})
      : SpectralProcessor(stft), geom_(geom), cfg_(cfg), atf_(std::move(atf)) {
    const std::size_t bins = stft.n_bins();
    if (atf_ && atf_->size() != bins) throw ConfigError("ATF table size must equal n_bins");
    for (std::size_t e = 0; e < kNumEars; ++e) weights_[e].resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * stft.sample_rate / static_cast<double>(stft.nfft);
      const Matrix4c gamma = diffuse_covariance(geom_, f);
      for (std::size_t e = 0; e < kNumEars; ++e) {
        const std::size_t ref = cfg_.reference[e];
        Vector4c d;
        if (atf_) {
          const Complex r = (*atf_)[k](static_cast<Eigen::Index>(ref));
          if (std::abs(r) == 0.0) throw ConfigError("ATF reference entry is zero");
          d = (*atf_)[k] / r;
        } else {
          d = steering_vector(geom_, cfg_.steer_azimuth, f, ref);
        }
        weights_[e][k] = mvdr_weights(d, gamma, cfg_.diagonal_loading);
      }
    }
  }

  std::string name() const override { return "mvdr"; }

  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<MvdrProcessor>(geom_, cfg_, atf_, stft_config());
  }

  /// Weights for ear `e` (0 left, 1 right) at bin `k`.
  const Vector4c& weights(std::size_t e, std::size_t k) const { return weights_[e][k]; }

 protected:
  void process_frame(const SpectralFrame& frame, std::span<Complex> left,
                     std::span<Complex> right) override {
    std::array<std::span<Complex>, kNumEars> out{left, right};
    for (std::size_t e = 0; e < kNumEars; ++e)
      for (std::size_t k = 0; k < frame.n_bins; ++k) {
        Complex acc = 0.0;
        for (std::size_t m = 0; m < kNumMics; ++m)
          acc += std::conj(weights_[e][k](static_cast<Eigen::Index>(m))) * frame(m, k);
        out[e][k] = acc;
      }
  }

 private:
  ArrayGeometry geom_;
  MvdrConfig cfg_;
  std::optional<AtfTable> atf_;
  std::array<std::vector<Vector4c>, kNumEars> weights_;
};

}  // namespace gcfs
