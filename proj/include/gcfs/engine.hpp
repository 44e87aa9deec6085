// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gcfs/audio.hpp"
#include "gcfs/stft.hpp"

namespace gcfs {

/// Samples per processing block; equal to the STFT hop (2 ms at 16 kHz).
inline constexpr std::size_t kBlockSize = 32;
inline constexpr std::size_t kNumEars = 2;

using BlockIn = std::span<const std::span<const double>>;
using BlockOut = std::span<const std::span<double>>;

/// A causal block processor mapping the 4-microphone input to left/right ear
/// outputs. Output sample n never depends on input beyond the end of the
/// block that contains n.
class FrameProcessor {
 public:
  virtual ~FrameProcessor() = default;

  virtual std::string name() const = 0;
  virtual std::size_t input_channels() const { return kNumMics; }
  std::size_t output_channels() const { return kNumEars; }
  /// Algorithmic delay of the output with respect to the input, in samples.
  virtual std::size_t latency() const = 0;
  /// True for processors whose state adapts to the input over seconds.
  virtual bool adaptive() const { return false; }
  virtual void reset() = 0;
  /// `in` holds input_channels() spans and `out` two spans, each kBlockSize long.
  virtual void process_block(BlockIn in, BlockOut out) = 0;
  /// Fresh instance with identical configuration and reset state.
  virtual std::unique_ptr<FrameProcessor> clone() const = 0;
};

/// Base for processors that operate on STFT frames of all microphones and
/// produce one spectrum per ear.
class SpectralProcessor : public FrameProcessor {
 public:
  explicit SpectralProcessor(StftConfig cfg = {})
      : cfg_(cfg), analyzer_(kNumMics, cfg),
        synth_{StftSynthesizer(cfg), StftSynthesizer(cfg)},
        ear_spec_{std::vector<Complex>(cfg.n_bins()), std::vector<Complex>(cfg.n_bins())} {}

  std::size_t latency() const override { return cfg_.window_len; }
  const StftConfig& stft_config() const { return cfg_; }

  void reset() override {
    analyzer_.reset();
    for (auto& s : synth_) s.reset();
    reset_state();
  }

  void process_block(BlockIn in, BlockOut out) override {
    analyzer_.analyze(in, frame_);
    process_frame(frame_, ear_spec_[0], ear_spec_[1]);
    for (std::size_t e = 0; e < kNumEars; ++e) synth_[e].synthesize(ear_spec_[e], out[e]);
  }

 protected:
  virtual void reset_state() {}
  virtual void process_frame(const SpectralFrame& frame, std::span<Complex> left,
                             std::span<Complex> right) = 0;

 private:
  StftConfig cfg_;
  StftAnalyzer analyzer_;
  std::array<StftSynthesizer, kNumEars> synth_;
  SpectralFrame frame_;
  std::array<std::vector<Complex>, kNumEars> ear_spec_;
};

/// Routes the front microphones to the ears, optionally through a pure delay
/// so that it can be aligned with another processor.
class BypassProcessor final : public FrameProcessor {
 public:
  explicit BypassProcessor(std::size_t delay = 0) : delay_(delay) { reset(); }

  std::string name() const override { return "bypass"; }
  std::size_t latency() const override { return delay_; }

  void reset() override {
    for (auto& line : lines_) line.assign(delay_, 0.0);
    pos_ = 0;
  }

  void process_block(BlockIn in, BlockOut out) override {
    const std::array<std::size_t, kNumEars> src{kFrontLeft, kFrontRight};
    for (std::size_t e = 0; e < kNumEars; ++e) {
      if (delay_ == 0) {
        std::copy(in[src[e]].begin(), in[src[e]].end(), out[e].begin());
        continue;
      }
      auto& line = lines_[e];
      std::size_t p = pos_;
      for (std::size_t n = 0; n < out[e].size(); ++n) {
        out[e][n] = line[p];
        line[p] = in[src[e]][n];
        p = (p + 1) % delay_;
      }
    }
    if (delay_ > 0) pos_ = (pos_ + in[0].size()) % delay_;
  }

  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<BypassProcessor>(delay_);
  }

 private:
  std::size_t delay_;
  std::array<std::vector<double>, kNumEars> lines_;
  std::size_t pos_ = 0;
};

/// Broadband gain on the front microphones ("gain only" condition).
class GainProcessor final : public FrameProcessor {
 public:
  explicit GainProcessor(double gain_db) : gain_db_(gain_db) {
    if (!std::isfinite(gain_db)) throw ConfigError("gain must be finite");
    gain_ = amplitude_from_db(gain_db);
  }

  std::string name() const override { return "gain"; }
  std::size_t latency() const override { return 0; }
  void reset() override { clipped_ = 0; }

  void process_block(BlockIn in, BlockOut out) override {
    const std::array<std::size_t, kNumEars> src{kFrontLeft, kFrontRight};
    for (std::size_t e = 0; e < kNumEars; ++e) {
      for (std::size_t n = 0; n < out[e].size(); ++n) {
        const double y = gain_ * in[src[e]][n];
        if (std::abs(y) > 1.0) ++clipped_;
        out[e][n] = y;
      }
    }
  }

  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<GainProcessor>(gain_db_);
  }

  double linear_gain() const { return gain_; }
  /// Output samples exceeding full scale since the last reset.
  std::size_t clipped_samples() const { return clipped_; }

 private:
  double gain_db_;
  double gain_ = 1.0;
  std::size_t clipped_ = 0;
};

struct StreamStats {
  std::size_t input_clipped = 0;
  std::size_t output_clipped = 0;
  std::size_t blocks = 0;
};

namespace detail {

/// Scratch buffers and span tables for one block.
struct BlockBuffers {
  BlockBuffers(std::size_t in_ch, std::size_t out_ch)
      : in(in_ch, std::vector<double>(kBlockSize)), out(out_ch, std::vector<double>(kBlockSize)) {
    for (auto& v : in) in_spans.emplace_back(v);
    for (auto& v : out) out_spans.emplace_back(v);
  }
  void load(const MultichannelAudio& audio, std::size_t start) {
    for (std::size_t c = 0; c < in.size(); ++c) {
      const auto& src = audio.vec(c);
      for (std::size_t n = 0; n < kBlockSize; ++n) {
        const std::size_t i = start + n;
        in[c][n] = i < src.size() ? src[i] : 0.0;
      }
    }
  }
  std::vector<std::vector<double>> in, out;
  std::vector<std::span<const double>> in_spans;
  std::vector<std::span<double>> out_spans;
};

}  // namespace detail

/// Runs `proc` over a whole recording. The trailing partial block is zero
/// padded and the result is truncated to the input length. The processor is
/// not reset, so consecutive calls continue the stream.
inline MultichannelAudio process_stream(FrameProcessor& proc, const MultichannelAudio& audio,
                                        StreamStats* stats = nullptr) {
  if (audio.channels() != proc.input_channels())
    throw ConfigError("input has " + std::to_string(audio.channels()) + " channels, processor '" +
                      proc.name() + "' expects " + std::to_string(proc.input_channels()));
  if (!audio.all_finite()) throw ConfigError("input contains non-finite samples");

  const std::size_t len = audio.frames();
  MultichannelAudio out(kNumEars, len, audio.sample_rate());
  detail::BlockBuffers buf(proc.input_channels(), kNumEars);
  std::size_t blocks = 0;
  for (std::size_t start = 0; start < len; start += kBlockSize, ++blocks) {
    buf.load(audio, start);
    proc.process_block(buf.in_spans, buf.out_spans);
    const std::size_t n_copy = std::min(kBlockSize, len - start);
    for (std::size_t e = 0; e < kNumEars; ++e)
      std::copy_n(buf.out[e].begin(), n_copy, out.vec(e).begin() + static_cast<long>(start));
  }
  if (stats) {
    stats->input_clipped += audio.count_clipped();
    stats->output_clipped += out.count_clipped();
    stats->blocks += blocks;
  }
  return out;
}

struct RtfReport {
  double audio_seconds = 0.0;
  double wall_seconds = 0.0;
  double rtf = 0.0;
  double per_frame_p50_us = 0.0;
  double per_frame_p95_us = 0.0;
  double per_frame_p99_us = 0.0;
  std::size_t frames = 0;
  std::size_t deadline_misses = 0;
  double deadline_us = 0.0;
};

inline double real_time_factor(double wall_seconds, double audio_seconds) {
  return wall_seconds / audio_seconds;
}

/// Nearest-rank percentile of an ascending-sorted sample.
inline double sorted_percentile(std::span<const double> sorted, double pct) {
  if (sorted.empty()) return 0.0;
  const double rank = std::ceil(pct / 100.0 * static_cast<double>(sorted.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

/// Single-threaded wall-clock benchmark; each block is timed individually and
/// compared against the hop duration.
inline RtfReport measure_rtf(FrameProcessor& proc, const MultichannelAudio& audio,
                             std::size_t repetitions = 1) {
  if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (audio.channels() != proc.input_channels()) throw ConfigError("channel mismatch");
  using clock = std::chrono::steady_clock;

  RtfReport rep;
  rep.deadline_us = 1e6 * static_cast<double>(kBlockSize) / audio.sample_rate();
  detail::BlockBuffers buf(proc.input_channels(), kNumEars);
  std::vector<double> times_us;
  times_us.reserve(repetitions * (audio.frames() / kBlockSize + 1));

  for (std::size_t r = 0; r < repetitions; ++r) {
    proc.reset();
    for (std::size_t start = 0; start < audio.frames(); start += kBlockSize) {
      buf.load(audio, start);
      const auto t0 = clock::now();
      proc.process_block(buf.in_spans, buf.out_spans);
      const auto t1 = clock::now();
      const double us = std::chrono::duration<double, std::micro>(t1 - t0).count();
      times_us.push_back(us);
      rep.wall_seconds += us * 1e-6;
    }
  }
  rep.frames = times_us.size();
  rep.audio_seconds = audio.seconds() * static_cast<double>(repetitions);
  rep.rtf = real_time_factor(rep.wall_seconds, rep.audio_seconds);
  rep.deadline_misses = static_cast<std::size_t>(
      std::count_if(times_us.begin(), times_us.end(), [&](double t) { return t > rep.deadline_us; }));
  std::sort(times_us.begin(), times_us.end());
  rep.per_frame_p50_us = sorted_percentile(times_us, 50.0);
  rep.per_frame_p95_us = sorted_percentile(times_us, 95.0);
  rep.per_frame_p99_us = sorted_percentile(times_us, 99.0);
  return rep;
}

}  // namespace gcfs
