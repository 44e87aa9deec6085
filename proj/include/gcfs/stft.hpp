// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcfs/audio.hpp"
#include "gcfs/fft.hpp"

namespace gcfs {

using Complex = std::complex<double>;

/// Framing used by every spectral processor: 4 ms Hann window, 2 ms hop,
/// 128-point FFT with the window centred by equal front/back zero padding.
struct StftConfig {
  double sample_rate = kSampleRate;
  std::size_t window_len = 64;
  std::size_t hop = 32;
  std::size_t nfft = 128;

  std::size_t pad_front() const { return (nfft - window_len) / 2; }
  std::size_t pad_back() const { return nfft - window_len - pad_front(); }
  std::size_t n_bins() const { return nfft / 2 + 1; }

  void validate() const {
    if (window_len % 2 != 0) throw ConfigError("window length must be even");
    if (window_len != 2 * hop) throw ConfigError("window must be twice the hop");
    if (nfft < window_len || (nfft - window_len) % 2 != 0)
      throw ConfigError("nfft must exceed the window by an even amount");
  }
};

/// One analysis frame: bins(channel, k).
struct SpectralFrame {
  std::size_t channels = 0;
  std::size_t n_bins = 0;
  std::uint64_t frame_index = 0;
  std::vector<Complex> data;

  SpectralFrame() = default;
  SpectralFrame(std::size_t ch, std::size_t bins)
      : channels(ch), n_bins(bins), data(ch * bins) {}

  std::span<Complex> channel(std::size_t c) { return {data.data() + c * n_bins, n_bins}; }
  std::span<const Complex> channel(std::size_t c) const {
    return {data.data() + c * n_bins, n_bins};
  }
  Complex& operator()(std::size_t c, std::size_t k) { return data[c * n_bins + k]; }
  Complex operator()(std::size_t c, std::size_t k) const { return data[c * n_bins + k]; }
};

/// Periodic Hann window; shifted copies at half-window hop sum to one.
inline std::vector<double> make_analysis_window(const StftConfig& cfg) {
  if (cfg.window_len % 2 != 0) throw ConfigError("window length must be even");
  std::vector<double> w(cfg.window_len);
  const double n = static_cast<double>(cfg.window_len);
  for (std::size_t i = 0; i < cfg.window_len; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / n));
  return w;
}

/// Streaming multichannel STFT analysis. Each call consumes `hop` new samples
/// per channel and produces one frame over the last `window_len` samples.
class StftAnalyzer {
 public:
  StftAnalyzer(std::size_t channels, StftConfig cfg = {})
      : cfg_(cfg), channels_(channels), window_(make_analysis_window(cfg)),
        fft_(cfg.nfft), history_(channels * cfg.window_len, 0.0), buf_(cfg.nfft, 0.0) {
    cfg_.validate();
  }

  const StftConfig& config() const { return cfg_; }
  std::size_t channels() const { return channels_; }

  void reset() {
    std::fill(history_.begin(), history_.end(), 0.0);
    next_index_ = 0;
  }

  /// `block[c]` must hold exactly `hop` samples.
  void analyze(std::span<const std::span<const double>> block, SpectralFrame& out) {
    if (block.size() != channels_) throw ConfigError("channel count mismatch with STFT state");
    const std::size_t W = cfg_.window_len, H = cfg_.hop;
    if (out.channels != channels_ || out.n_bins != cfg_.n_bins())
      out = SpectralFrame(channels_, cfg_.n_bins());
    for (std::size_t c = 0; c < channels_; ++c) {
      if (block[c].size() != H) throw ConfigError("block length must equal the hop size");
      double* hist = history_.data() + c * W;
      std::copy(hist + H, hist + W, hist);
      std::copy(block[c].begin(), block[c].end(), hist + (W - H));

      std::fill(buf_.begin(), buf_.end(), 0.0);
      for (std::size_t n = 0; n < W; ++n) buf_[cfg_.pad_front() + n] = hist[n] * window_[n];
      fft_.forward(buf_, out.channel(c));
    }
    out.frame_index = next_index_++;
  }

 private:
  StftConfig cfg_;
  std::size_t channels_;
  std::vector<double> window_;
  RealFft fft_;
  std::vector<double> history_;
  std::vector<double> buf_;
  std::uint64_t next_index_ = 0;
};

/// Inverse DFT with 1/nfft scaling and plain overlap-add (no synthesis
/// window). A completed hop is held for one block before it is emitted, so
/// identity filtering reproduces the input delayed by exactly window_len
/// samples, the real-time latency of block-wise framing.
class StftSynthesizer {
 public:
  explicit StftSynthesizer(StftConfig cfg = {})
      : cfg_(cfg), fft_(cfg.nfft), accum_(cfg.window_len, 0.0), pending_(cfg.hop, 0.0),
        buf_(cfg.nfft, 0.0) {
    cfg_.validate();
  }

  void reset() {
    std::fill(accum_.begin(), accum_.end(), 0.0);
    std::fill(pending_.begin(), pending_.end(), 0.0);
  }

  /// Delay from analysis input to synthesis output for identity filtering.
  std::size_t latency() const { return cfg_.window_len; }

  /// Emits `hop` samples into `out`.
  void synthesize(std::span<const Complex> frame, std::span<double> out) {
    if (frame.size() != cfg_.n_bins()) throw ConfigError("frame must hold n_bins values");
    if (out.size() != cfg_.hop) throw ConfigError("output block must equal the hop size");
    const std::size_t W = cfg_.window_len, H = cfg_.hop;
    fft_.inverse(frame, buf_);
    const double scale = 1.0 / static_cast<double>(cfg_.nfft);
    for (std::size_t n = 0; n < W; ++n) accum_[n] += buf_[cfg_.pad_front() + n] * scale;
    std::copy(pending_.begin(), pending_.end(), out.begin());
    std::copy(accum_.begin(), accum_.begin() + H, pending_.begin());
    std::copy(accum_.begin() + H, accum_.end(), accum_.begin());
    std::fill(accum_.begin() + (W - H), accum_.end(), 0.0);
  }

 private:
  StftConfig cfg_;
  RealFft fft_;
  std::vector<double> accum_;
  std::vector<double> pending_;
  std::vector<double> buf_;
};

}  // namespace gcfs
