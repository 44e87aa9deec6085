// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "gcfs/audio.hpp"
#include "gcfs/engine.hpp"
#include "gcfs/geometry.hpp"
#include "gcfs/scene.hpp"

namespace gcfs {

inline constexpr double kAttenuationFloorDb = -80.0;
inline constexpr double kSiSdrCapDb = 100.0;

/// 10 log10(E_processed / E_bypass), floored at -80 dB.
inline double attenuation_db(std::span<const double> processed, std::span<const double> bypass) {
  if (processed.size() != bypass.size()) throw ConfigError("attenuation_db: length mismatch");
  const double eb = energy(bypass);
  if (!(eb > 0.0)) throw ConfigError("attenuation_db: bypass signal has zero energy");
  const double ep = energy(processed);
  if (ep <= 0.0) return kAttenuationFloorDb;
  return std::max(kAttenuationFloorDb, 10.0 * std::log10(ep / eb));
}

/// Scale-invariant SDR in dB, clamped to [-100, 100].
inline double si_sdr(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw ConfigError("si_sdr: length mismatch");
  const double rr = energy(ref);
  if (!(rr > 0.0)) throw ConfigError("si_sdr: reference has zero energy");
  double er = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) er += est[n] * ref[n];
  const double a = er / rr;
  double st = 0.0, ee = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    const double s = a * ref[n];
    st += s * s;
    ee += (est[n] - s) * (est[n] - s);
  }
  if (ee <= 0.0) return kSiSdrCapDb;
  if (st <= 0.0) return -kSiSdrCapDb;
  return std::clamp(10.0 * std::log10(st / ee), -kSiSdrCapDb, kSiSdrCapDb);
}

// ---------------------------------------------------------------------------
// Beam pattern
// ---------------------------------------------------------------------------

struct BeamPattern {
  std::vector<double> angles;  // degrees
  std::vector<double> attenuation_left;
  std::vector<double> attenuation_right;
};

inline std::vector<double> beam_pattern_angles() {
  std::vector<double> a;
  for (int d = -180; d <= 180; d += 5) a.push_back(d);
  return a;
}

struct BeamPatternOptions {
  double distance = 1.5;
  /// Warm-up before measuring; negative selects 2 s for adaptive processors
  /// and 0.25 s otherwise.
  double warmup_s = -1.0;
};

/// Attenuation over incidence angle relative to the unprocessed front
/// microphones. The probe is split into `n_utterances` equal segments; each
/// (angle, segment) pair is rendered as a point source, preceded by a warm-up
/// taken from the probe itself, and processed from a reset state. Per-segment
/// dB values are averaged.
inline BeamPattern beam_pattern(FrameProcessor& proc, const ArrayGeometry& geom, std::span<const double> probe,
                                std::size_t n_utterances, BeamPatternOptions opts = {}) {
  if (n_utterances == 0 || probe.size() / n_utterances < 4 * kBlockSize)
    throw ConfigError("beam_pattern: probe too short for the requested number of segments");
  const double warm_s = opts.warmup_s >= 0.0 ? opts.warmup_s : (proc.adaptive() ? 2.0 : 0.25);
  const std::size_t warm = static_cast<std::size_t>(std::llround(warm_s * kSampleRate));
  const std::size_t seg = probe.size() / n_utterances;
  const std::size_t lat = proc.latency();
  const std::size_t total = warm + seg + lat;
  BypassProcessor bypass(lat);

  BeamPattern bp;
  bp.angles = beam_pattern_angles();
  std::vector<double> sig(total);
  for (double angle : bp.angles) {
    double sum_l = 0.0, sum_r = 0.0;
    for (std::size_t u = 0; u < n_utterances; ++u) {
      // Warm-up wraps backwards through the probe so the measured segment is
      // exactly segment u.
      const std::size_t start = (u * seg + probe.size() * (warm / probe.size() + 1) - warm) % probe.size();
      for (std::size_t n = 0; n < total; ++n) sig[n] = probe[(start + n) % probe.size()];
      const auto mics = render_point_source(geom, angle, opts.distance, sig);
      proc.reset();
      bypass.reset();
      const auto y = process_stream(proc, mics);
      const auto ref = process_stream(bypass, mics);
      const std::size_t from = warm + lat;
      auto tail = [&](const MultichannelAudio& a, std::size_t c) {
        return std::span<const double>(a.channel(c)).subspan(from, seg);
      };
      sum_l += attenuation_db(tail(y, 0), tail(ref, 0));
      sum_r += attenuation_db(tail(y, 1), tail(ref, 1));
    }
    bp.attenuation_left.push_back(sum_l / static_cast<double>(n_utterances));
    bp.attenuation_right.push_back(sum_r / static_cast<double>(n_utterances));
  }
  return bp;
}

/// Filter-and-sum of the two front microphones with phase-only steering,
/// 0.5 * (FL + FR), same signal to both ears.
class DelayAndSumProcessor final : public SpectralProcessor {
 public:
  DelayAndSumProcessor(ArrayGeometry geom, double steer_deg = 0.0, StftConfig cfg = {})
      : SpectralProcessor(cfg), geom_(geom), steer_(steer_deg) {
    const std::size_t F = cfg.n_bins();
    for (auto& s : steer_phase_) s.resize(F);
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t m = i == 0 ? kFrontLeft : kFrontRight;
      const double tau = geom.plane_wave_delay(m, steer_deg) - geom.plane_wave_delay(kFrontLeft, steer_deg);
      for (std::size_t k = 0; k < F; ++k) {
        const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.nfft);
        steer_phase_[i][k] = 0.5 * std::polar(1.0, 2.0 * kPi * f * tau);
      }
    }
  }

  std::string name() const override { return "delay-and-sum"; }
  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<DelayAndSumProcessor>(geom_, steer_, stft_config());
  }

 protected:
  void process_frame(const SpectralFrame& frame, std::span<Complex> left, std::span<Complex> right) override {
    for (std::size_t k = 0; k < left.size(); ++k) {
      const Complex y = steer_phase_[0][k] * frame(kFrontLeft, k) + steer_phase_[1][k] * frame(kFrontRight, k);
      left[k] = y;
      right[k] = y;
    }
  }

 private:
  ArrayGeometry geom_;
  double steer_;
  std::array<std::vector<Complex>, 2> steer_phase_;
};

/// Closed-form attenuation (dB) of DelayAndSumProcessor steered to 0 deg for
/// a point source at `azimuth_deg`, `distance` metres, for ear `ear`.
/// `psd[k]` is the source power at frequency k * sample_rate / (2 (psd.size() - 1)).
inline double delay_and_sum_attenuation(const ArrayGeometry& geom, double azimuth_deg, double distance,
                                        std::span<const double> psd, std::size_t ear,
                                        double sample_rate = kSampleRate) {
  const Vec3 src = distance * direction(azimuth_deg);
  const double dl = norm(src - geom.mic[kFrontLeft]), dr = norm(src - geom.mic[kFrontRight]);
  const double de = ear == 0 ? dl : dr;
  const std::size_t K = psd.size();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double w = 2.0 * kPi * static_cast<double>(k) * sample_rate / (2.0 * static_cast<double>(K - 1));
    const Complex h = 0.5 * (std::polar(1.0 / dl, -w * dl / geom.speed_of_sound) +
                             std::polar(1.0 / dr, -w * dr / geom.speed_of_sound));
    num += psd[k] * std::norm(h);
    den += psd[k] / (de * de);
  }
  return 10.0 * std::log10(num / den);
}

/// Periodogram power spectrum of `x` averaged over `nfft`-point Hann frames.
inline std::vector<double> power_spectrum(std::span<const double> x, std::size_t nfft = 1024) {
  RealFft fft(nfft);
  std::vector<double> win(nfft), buf(nfft), psd(fft.bins(), 0.0);
  for (std::size_t n = 0; n < nfft; ++n) win[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / nfft);
  std::vector<Complex> X(fft.bins());
  for (std::size_t s = 0; s + nfft <= x.size(); s += nfft / 2) {
    for (std::size_t n = 0; n < nfft; ++n) buf[n] = x[s + n] * win[n];
    fft.forward(buf, X);
    for (std::size_t k = 0; k < X.size(); ++k) psd[k] += std::norm(X[k]);
  }
  return psd;
}

inline void write_beam_pattern_csv(std::ostream& os, const BeamPattern& bp) {
  os << "angle_deg,att_left_db,att_right_db\n" << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < bp.angles.size(); ++i)
    os << std::setprecision(0) << bp.angles[i] << std::setprecision(4) << "," << bp.attenuation_left[i] << ","
       << bp.attenuation_right[i] << "\n";
}

// ---------------------------------------------------------------------------
// SNR sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string snr;  // dB value, or "mean"
  std::string algorithm;
  double si_sdr_left = 0.0;
  double si_sdr_right = 0.0;
  double si_sdr_better_ear = 0.0;
  double noise_att_db = 0.0;
};

struct SweepReport {
  std::vector<double> snrs;
  std::vector<std::string> algorithms;
  /// values[a][s]: averages over sentences for algorithm a at snrs[s].
  std::vector<std::vector<SweepRow>> values;
  /// means[a]: arithmetic mean of values[a] over the SNR grid.
  std::vector<SweepRow> means;
};

inline std::vector<double> sweep_snrs() {
  std::vector<double> s;
  for (int d = -5; d <= 10; ++d) s.push_back(d);
  return s;
}

/// Per-sentence target generator: sentence index -> mono signal.
using SentenceSource = std::function<std::vector<double>(std::size_t)>;

/// Speech-shaped noise under a slow random on/off envelope, 2 s per sentence.
inline SentenceSource default_sentences(std::uint64_t seed, double seconds = 2.0) {
  return [seed, seconds](std::size_t i) {
    const auto len = static_cast<std::size_t>(std::llround(seconds * kSampleRate));
    auto x = speech_shaped_noise(len, seed * 100003 + i);
    std::mt19937_64 rng(seed * 7 + i);
    std::uniform_real_distribution<double> depth(0.1, 1.0);
    const std::size_t syl = kSampleRate / 4;
    double prev = depth(rng), next = depth(rng);
    for (std::size_t n = 0; n < len; ++n) {
      if (n % syl == 0 && n > 0) {
        prev = next;
        next = depth(rng);
      }
      const double t = static_cast<double>(n % syl) / static_cast<double>(syl);
      x[n] *= prev + (next - prev) * t;
    }
    return x;
  };
}

/// Runs every processor on `n_sentences` scenes per SNR. The scene template
/// supplies interferers, diffuse noise, distance and target azimuth; its
/// target signal is replaced by the sentence, and noise signals are resized
/// to the sentence length. Sentences and noise are identical across SNRs.
/// SI-SDR is measured on the latency-aligned output against the clean front
/// microphone of each ear; noise attenuation processes noise_ref alone
/// through a fresh clone and compares with the unprocessed front mics.
inline SweepReport snr_sweep(const std::vector<const FrameProcessor*>& procs, const SceneSpec& scene_template,
                             const ArrayGeometry& geom, std::span<const double> snrs, std::size_t n_sentences,
                             const SentenceSource& sentences) {
  if (procs.empty() || snrs.empty() || n_sentences == 0) throw ConfigError("snr_sweep: empty grid");
  SweepReport rep;
  rep.snrs.assign(snrs.begin(), snrs.end());
  for (const auto* p : procs) rep.algorithms.push_back(p->name());
  const std::size_t A = procs.size(), S = snrs.size();
  std::vector<std::vector<std::array<double, 4>>> acc(A, std::vector<std::array<double, 4>>(S, {0, 0, 0, 0}));

  for (std::size_t i = 0; i < n_sentences; ++i) {
    SceneSpec spec = scene_template;
    spec.target.signal = sentences(i);
    spec.seed = scene_template.seed * 1000 + i;
    spec.better_ear_snr = 0.0;
    const auto base = mix_scene(spec, geom);
    const std::size_t len = base.mixture.frames();

    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t lat = procs[a]->latency();
      if (lat >= len) throw ConfigError("snr_sweep: sentence shorter than processor latency");
      auto noise_proc = procs[a]->clone();
      const auto yn = process_stream(*noise_proc, base.noise_ref);
      double en_out = 0.0, en_in = 0.0;
      for (std::size_t e = 0; e < kNumEars; ++e) {
        en_out += energy(std::span<const double>(yn.channel(e)).subspan(lat));
        en_in += energy(std::span<const double>(base.noise_ref.channel(e == 0 ? kFrontLeft : kFrontRight))
                            .first(len - lat));
      }
      const double natt =
          en_out > 0.0 ? std::max(kAttenuationFloorDb, 10.0 * std::log10(en_out / en_in)) : kAttenuationFloorDb;

      for (std::size_t s = 0; s < S; ++s) {
        const double g = amplitude_from_db(snrs[s]);
        MultichannelAudio mix = base.target_image;
        mix *= g;
        mix += base.noise_ref;
        auto proc = procs[a]->clone();
        const auto y = process_stream(*proc, mix);
        std::array<double, 2> sd{};
        for (std::size_t e = 0; e < kNumEars; ++e)
          sd[e] = si_sdr(std::span<const double>(y.channel(e)).subspan(lat),
                         std::span<const double>(base.target_ref.channel(e)).first(len - lat));
        auto& c = acc[a][s];
        c[0] += sd[0];
        c[1] += sd[1];
        c[2] += std::max(sd[0], sd[1]);
        c[3] += natt;
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(n_sentences);
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  rep.values.resize(A);
  for (std::size_t a = 0; a < A; ++a) {
    SweepRow mean{"mean", rep.algorithms[a]};
    for (std::size_t s = 0; s < S; ++s) {
      const auto& c = acc[a][s];
      SweepRow r{fmt(snrs[s]), rep.algorithms[a], c[0] * inv, c[1] * inv, c[2] * inv, c[3] * inv};
      mean.si_sdr_left += r.si_sdr_left / static_cast<double>(S);
      mean.si_sdr_right += r.si_sdr_right / static_cast<double>(S);
      mean.si_sdr_better_ear += r.si_sdr_better_ear / static_cast<double>(S);
      mean.noise_att_db += r.noise_att_db / static_cast<double>(S);
      rep.values[a].push_back(r);
    }
    rep.means.push_back(mean);
  }
  return rep;
}

inline void write_sweep_csv(std::ostream& os, const SweepReport& rep) {
  os << "snr_db,algorithm,si_sdr_left,si_sdr_right,si_sdr_better_ear,noise_att_db\n"
     << std::fixed << std::setprecision(4);
  auto row = [&os](const SweepRow& r) {
    os << r.snr << "," << r.algorithm << "," << r.si_sdr_left << "," << r.si_sdr_right << ","
       << r.si_sdr_better_ear << "," << r.noise_att_db << "\n";
  };
  for (std::size_t s = 0; s < rep.snrs.size(); ++s)
    for (const auto& v : rep.values) row(v[s]);
  for (const auto& m : rep.means) row(m);
}

}  // namespace gcfs
