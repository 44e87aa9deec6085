// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gcfs/audio.hpp"
#include "gcfs/fft.hpp"

namespace gcfs::testing {

/// O(N^2) reference DFT, bins 0..N/2.
inline std::vector<std::complex<double>> brute_dft(std::span<const double> x) {
  const std::size_t N = x.size();
  std::vector<std::complex<double>> X(N / 2 + 1);
  for (std::size_t k = 0; k < X.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      acc += x[n] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * n % N) / static_cast<double>(N));
    X[k] = acc;
  }
  return X;
}

inline MultichannelAudio random_audio(std::size_t channels, std::size_t frames, std::uint64_t seed,
                                      double rms = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, rms);
  MultichannelAudio a(channels, frames);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t n = 0; n < frames; ++n) a(c, n) = d(rng);
  return a;
}

inline MultichannelAudio tone(std::size_t channels, std::size_t frames, double freq, double amp = 1.0) {
  MultichannelAudio a(channels, frames);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t n = 0; n < frames; ++n)
      a(c, n) = amp * std::sin(2.0 * kPi * freq * static_cast<double>(n) / kSampleRate);
  return a;
}

/// 10 log10(|a - b|^2 / |b|^2).
inline double error_db(std::span<const double> a, std::span<const double> b) {
  double e = 0.0, r = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    e += (a[n] - b[n]) * (a[n] - b[n]);
    r += b[n] * b[n];
  }
  return 10.0 * std::log10(e / r);
}

/// Brick-wall band limit [lo, hi] Hz via one zero-padded FFT.
inline std::vector<double> band_limit(std::span<const double> x, double lo, double hi) {
  std::size_t N = 1;
  while (N < 2 * x.size()) N <<= 1;
  RealFft f(N);
  std::vector<double> b(N, 0.0);
  std::copy(x.begin(), x.end(), b.begin());
  std::vector<std::complex<double>> X(f.bins());
  f.forward(b, X);
  for (std::size_t k = 0; k < X.size(); ++k) {
    const double fr = static_cast<double>(k) * kSampleRate / static_cast<double>(N);
    if (fr < lo || fr > hi) X[k] = 0.0;
  }
  f.inverse(X, b);
  std::vector<double> out(x.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = b[n] / static_cast<double>(N);
  return out;
}

}  // namespace gcfs::testing
