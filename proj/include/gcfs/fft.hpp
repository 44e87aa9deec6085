// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

#include "gcfs/audio.hpp"

namespace gcfs {

namespace detail {
// The FFTW planner is not reentrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real-input DFT of fixed size with owned, aligned work buffers.
/// Forward is unnormalized; inverse is unnormalized as well (callers scale by 1/n).
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw ConfigError("FFT size must be positive");
    time_ = fftw_alloc_real(n_);
    freq_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int in = static_cast<int>(n_);
    fwd_ = fftw_plan_dft_r2c_1d(in, time_, freq_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(in, freq_, time_, FFTW_ESTIMATE);
  }

  RealFft(const RealFft& other) : RealFft(other.n_) {}
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(time_);
    fftw_free(freq_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), time_);
    fftw_execute(fwd_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = {freq_[k][0], freq_[k][1]};
  }

  /// Hermitian-symmetric extension is implicit; imaginary parts of DC and
  /// Nyquist are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    for (std::size_t k = 0; k < bins(); ++k) {
      freq_[k][0] = in[k].real();
      freq_[k][1] = in[k].imag();
    }
    fftw_execute(inv_);
    std::copy(time_, time_ + n_, out.begin());
  }

 private:
  std::size_t n_;
  double* time_ = nullptr;
  fftw_complex* freq_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace gcfs
