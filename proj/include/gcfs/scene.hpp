// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gcfs/audio.hpp"
#include "gcfs/fft.hpp"
#include "gcfs/geometry.hpp"
#include "gcfs/wav.hpp"

namespace gcfs {

// ---------------------------------------------------------------------------
// Test signals
// ---------------------------------------------------------------------------

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double rms = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, rms);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

/// Denominator of the all-pole speech-spectrum envelope (16 kHz): flat to
/// about 1 kHz, -12 dB at 2 kHz, -17 dB at 4 kHz.
inline constexpr std::array<double, 9> kSpeechEnvelope{
    1.0, -0.968498, 0.046757, 0.067323, 0.044717, -0.20063, 0.346194, -0.215027, 0.082105};

/// White Gaussian noise shaped by the speech envelope, scaled to `rms`.
inline std::vector<double> speech_shaped_noise(std::size_t n, std::uint64_t seed, double rms = 0.1) {
  constexpr std::size_t kWarmup = 512;
  const auto e = white_noise(n + kWarmup, seed, 1.0);
  std::vector<double> y(n + kWarmup, 0.0);
  const auto& a = kSpeechEnvelope;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double acc = e[i];
    for (std::size_t k = 1; k < a.size() && k <= i; ++k) acc -= a[k] * y[i - k];
    y[i] = acc;
  }
  std::vector<double> out(y.begin() + kWarmup, y.end());
  const double cur = std::sqrt(energy(out) / static_cast<double>(std::max<std::size_t>(n, 1)));
  if (cur > 0.0)
    for (double& v : out) v *= rms / cur;
  return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Band-limited delay and gain per output channel, applied as linear phase on
/// a zero-padded DFT of the whole signal. Delays are in samples and may be
/// fractional or negative.
inline MultichannelAudio delay_and_scale(std::span<const double> sig, std::span<const double> delays,
                                         std::span<const double> gains) {
  const std::size_t len = sig.size();
  double max_delay = 0.0;
  for (double d : delays) max_delay = std::max(max_delay, std::abs(d));
  const std::size_t N = next_pow2(len + static_cast<std::size_t>(std::ceil(max_delay)) + 4096);
  RealFft fft(N);
  std::vector<double> buf(N, 0.0);
  std::copy(sig.begin(), sig.end(), buf.begin());
  std::vector<Complex> X(fft.bins()), Y(fft.bins());
  fft.forward(buf, X);

  MultichannelAudio out(delays.size(), len);
  for (std::size_t m = 0; m < delays.size(); ++m) {
    for (std::size_t k = 0; k < X.size(); ++k) {
      const double phase = -2.0 * kPi * static_cast<double>(k) * delays[m] / static_cast<double>(N);
      Y[k] = X[k] * std::polar(gains[m], phase);
    }
    Y.back() = Complex(Y.back().real(), 0.0);
    fft.inverse(Y, buf);
    for (std::size_t n = 0; n < len; ++n) out(m, n) = buf[n] / static_cast<double>(N);
  }
  return out;
}

}  // namespace detail

/// Point source at `distance` metres: per microphone a propagation delay
/// |src - p_m| / c and a 1 / max(|src - p_m|, 0.1) spreading loss.
inline MultichannelAudio render_point_source(const ArrayGeometry& geom, double azimuth_deg, double distance,
                                             std::span<const double> sig, double elevation_deg = 0.0) {
  if (!(distance >= 0.5)) throw ConfigError("point sources must be at least 0.5 m away");
  const Vec3 src = distance * direction(azimuth_deg, elevation_deg);
  std::array<double, kNumMics> delays{}, gains{};
  for (std::size_t m = 0; m < kNumMics; ++m) {
    const double d = norm(src - geom.mic[m]);
    delays[m] = d / geom.speed_of_sound * kSampleRate;
    gains[m] = 1.0 / std::max(d, 0.1);
  }
  return detail::delay_and_scale(sig, delays, gains);
}

/// Far-field plane wave with unit gain; delays relative to the array origin.
inline MultichannelAudio render_plane_wave(const ArrayGeometry& geom, double azimuth_deg,
                                           std::span<const double> sig, double elevation_deg = 0.0) {
  std::array<double, kNumMics> delays{}, gains{};
  for (std::size_t m = 0; m < kNumMics; ++m) {
    delays[m] = geom.plane_wave_delay(m, azimuth_deg, elevation_deg) * kSampleRate;
    gains[m] = 1.0;
  }
  return detail::delay_and_scale(sig, delays, gains);
}

enum class DiffuseLayout { kSphere, kRing };

/// Pseudo-diffuse field: `n_virtual` plane waves, each carrying an
/// independently phase-randomized copy of `noise`, arriving from directions
/// spread evenly over the sphere (or the horizontal ring). Output power per
/// microphone matches the power of `noise`.
inline MultichannelAudio render_diffuse(const ArrayGeometry& geom, std::span<const double> noise,
                                        std::size_t n_virtual, std::uint64_t seed,
                                        DiffuseLayout layout = DiffuseLayout::kSphere) {
  if (n_virtual < 8) throw ConfigError("diffuse rendering needs at least 8 virtual sources");
  const std::size_t len = noise.size();
  MultichannelAudio out(kNumMics, len);
  if (energy(noise) == 0.0) return out;

  const std::size_t N = detail::next_pow2(len + 4096);
  RealFft fft(N);
  std::vector<double> buf(N, 0.0);
  std::copy(noise.begin(), noise.end(), buf.begin());
  std::vector<Complex> X(fft.bins());
  fft.forward(buf, X);

  std::array<std::vector<Complex>, kNumMics> acc;
  for (auto& a : acc) a.assign(fft.bins(), Complex(0.0, 0.0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const double norm_gain = 1.0 / std::sqrt(static_cast<double>(n_virtual));

  for (std::size_t v = 0; v < n_virtual; ++v) {
    double az = 0.0, el = 0.0;
    if (layout == DiffuseLayout::kSphere) {
      const double z = 1.0 - 2.0 * (static_cast<double>(v) + 0.5) / static_cast<double>(n_virtual);
      el = rad2deg(std::asin(z));
      az = rad2deg(std::fmod(static_cast<double>(v) * golden, 2.0 * kPi));
    } else {
      az = 360.0 * static_cast<double>(v) / static_cast<double>(n_virtual);
    }
    std::array<double, kNumMics> tau{};
    for (std::size_t m = 0; m < kNumMics; ++m) tau[m] = geom.plane_wave_delay(m, az, el) * kSampleRate;
    for (std::size_t k = 0; k < X.size(); ++k) {
      const double mag = std::abs(X[k]) * norm_gain;
      const double phi = uni(rng);
      for (std::size_t m = 0; m < kNumMics; ++m) {
        const double ph = phi - 2.0 * kPi * static_cast<double>(k) * tau[m] / static_cast<double>(N);
        acc[m][k] += std::polar(mag, ph);
      }
    }
  }
  for (std::size_t m = 0; m < kNumMics; ++m) {
    acc[m].back() = Complex(acc[m].back().real(), 0.0);
    acc[m].front() = Complex(acc[m].front().real(), 0.0);
    fft.inverse(acc[m], buf);
    for (std::size_t n = 0; n < len; ++n) out(m, n) = buf[n] / static_cast<double>(N);
  }
  double mean_power = 0.0;
  for (std::size_t m = 0; m < kNumMics; ++m) mean_power += energy(out.channel(m));
  mean_power /= static_cast<double>(kNumMics);
  if (mean_power > 0.0) out *= std::sqrt(energy(noise) / mean_power);
  return out;
}

/// Convolves each channel with an independent exponentially decaying noise
/// tail (reverberation smoke tests). `level_db` is the tail energy relative
/// to the direct path.
inline MultichannelAudio add_reverb_tail(const MultichannelAudio& dry, double t60, double level_db,
                                         std::uint64_t seed) {
  if (!(t60 > 0.0)) return dry;
  const std::size_t len = dry.frames();
  const std::size_t tail_len = static_cast<std::size_t>(std::ceil(1.5 * t60 * dry.sample_rate()));
  const std::size_t N = detail::next_pow2(len + tail_len + 1);
  RealFft fft(N);
  std::vector<double> buf(N), h(N);
  std::vector<Complex> X(fft.bins()), H(fft.bins());
  MultichannelAudio out(dry.channels(), len, dry.sample_rate());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double decay = std::log(1000.0) / (t60 * dry.sample_rate());  // -60 dB at t60

  for (std::size_t c = 0; c < dry.channels(); ++c) {
    std::fill(h.begin(), h.end(), 0.0);
    double tail_energy = 0.0;
    for (std::size_t n = 16; n < tail_len; ++n) {
      h[n] = gauss(rng) * std::exp(-decay * static_cast<double>(n));
      tail_energy += h[n] * h[n];
    }
    const double g = std::sqrt(std::pow(10.0, level_db / 10.0) / tail_energy);
    for (std::size_t n = 16; n < tail_len; ++n) h[n] *= g;
    h[0] = 1.0;
    fft.forward(h, H);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(dry.vec(c).begin(), dry.vec(c).end(), buf.begin());
    fft.forward(buf, X);
    for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
    fft.inverse(X, buf);
    for (std::size_t n = 0; n < len; ++n) out(c, n) = buf[n] / static_cast<double>(N);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene mixing
// ---------------------------------------------------------------------------

struct SourceSpec {
  double azimuth = 0.0;
  std::vector<double> signal;
};

struct InterfererSpec {
  double azimuth = 0.0;
  std::vector<double> signal;
  /// Level below the unit reference: the interferer is scaled so that its
  /// better-ear power is 10^(-snr_offset/10).
  double snr_offset = 0.0;
};

struct DiffuseSpec {
  std::vector<double> signal;
  /// Better-ear power of the diffuse field is 10^(level_db/10).
  double level_db = 0.0;
  std::size_t n_virtual = 36;
};

struct SceneSpec {
  SourceSpec target;
  std::vector<InterfererSpec> interferers;
  std::optional<DiffuseSpec> diffuse;
  double better_ear_snr = 0.0;  // dB
  std::uint64_t seed = 0;
  double distance = 1.5;   // m, for all point sources
  double reverb_t60 = 0.0;  // s; 0 disables the reverberant tail
  double reverb_level_db = -6.0;

  void validate() const {
    auto az_ok = [](double a) { return std::isfinite(a) && a >= -180.0 && a < 180.0; };
    if (target.signal.empty()) throw ConfigError("scene has no target signal");
    if (!az_ok(target.azimuth)) throw ConfigError("target azimuth must lie in [-180, 180)");
    for (const auto& i : interferers) {
      if (!az_ok(i.azimuth)) throw ConfigError("interferer azimuth must lie in [-180, 180)");
      if (!std::isfinite(i.snr_offset)) throw ConfigError("interferer SNR offset must be finite");
    }
    if (!std::isfinite(better_ear_snr)) throw ConfigError("better-ear SNR must be finite");
    if (diffuse && !std::isfinite(diffuse->level_db)) throw ConfigError("diffuse level must be finite");
  }
};

struct RenderedScene {
  MultichannelAudio mixture;     // 4 ch
  MultichannelAudio target_ref;  // 2 ch: clean front-left, front-right
  MultichannelAudio target_image;  // 4 ch
  MultichannelAudio noise_ref;   // 4 ch
  double target_gain = 1.0;
};

/// Better-ear power of a 4-channel render: max over the front microphones.
inline double better_ear_power(const MultichannelAudio& x) {
  return std::max(energy(x.channel(kFrontLeft)), energy(x.channel(kFrontRight)));
}

/// max over the front mics of target power / noise power, in dB.
inline double better_ear_snr_db(const MultichannelAudio& target, const MultichannelAudio& noise) {
  const std::size_t l = target.channels() == 2 ? std::size_t{0} : std::size_t{kFrontLeft};
  const std::size_t r = target.channels() == 2 ? std::size_t{1} : std::size_t{kFrontRight};
  const double snr_l = energy(target.channel(l)) / energy(noise.channel(kFrontLeft));
  const double snr_r = energy(target.channel(r)) / energy(noise.channel(kFrontRight));
  return db_from_power_ratio(std::max(snr_l, snr_r));
}

inline MultichannelAudio mix_scene_noise(const SceneSpec& spec, const ArrayGeometry& geom) {
  const std::size_t len = spec.target.signal.size();
  MultichannelAudio noise(kNumMics, len);
  auto fit = [len](std::vector<double> v) {
    v.resize(len, 0.0);
    return v;
  };
  std::uint64_t sub = 1;
  for (const auto& itf : spec.interferers) {
    const auto sig = fit(itf.signal);
    auto r = render_point_source(geom, itf.azimuth, spec.distance, sig);
    r = add_reverb_tail(r, spec.reverb_t60, spec.reverb_level_db, spec.seed * 7919 + sub++);
    const double p = better_ear_power(r);
    if (p > 0.0) r *= std::sqrt(std::pow(10.0, -itf.snr_offset / 10.0) / p);
    noise += r;
  }
  if (spec.diffuse) {
    const auto sig = fit(spec.diffuse->signal);
    auto r = render_diffuse(geom, sig, spec.diffuse->n_virtual, spec.seed * 7919 + 1000);
    const double p = better_ear_power(r);
    if (p > 0.0) r *= std::sqrt(std::pow(10.0, spec.diffuse->level_db / 10.0) / p);
    noise += r;
  }
  return noise;
}

/// Renders target and noise, then scales the target so that the better-ear
/// SNR equals spec.better_ear_snr exactly.
inline RenderedScene mix_scene(const SceneSpec& spec, const ArrayGeometry& geom) {
  spec.validate();
  auto target = render_point_source(geom, spec.target.azimuth, spec.distance, spec.target.signal);
  target = add_reverb_tail(target, spec.reverb_t60, spec.reverb_level_db, spec.seed * 7919);
  const auto noise = mix_scene_noise(spec, geom);
  if (energy(noise.channel(kFrontLeft)) == 0.0 || energy(noise.channel(kFrontRight)) == 0.0)
    throw ConfigError("scene has no noise at the front microphones; SNR would be infinite");
  if (better_ear_power(target) == 0.0) throw ConfigError("target signal is silent");

  const double current = better_ear_snr_db(target, noise);
  const double g = amplitude_from_db(spec.better_ear_snr - current);
  target *= g;

  RenderedScene out;
  out.target_gain = g;
  const std::array<std::size_t, 2> front{kFrontLeft, kFrontRight};
  out.target_ref = target.select(front);
  out.noise_ref = noise;
  out.target_image = target;
  out.mixture = target;
  out.mixture += noise;
  return out;
}

// ---------------------------------------------------------------------------
// Scene files
// ---------------------------------------------------------------------------

/// Generates or loads a source signal: "ssn" (speech-shaped noise), "white",
/// or "wav:<path>" (first channel, 16 kHz).
inline std::vector<double> make_source_signal(const std::string& desc, std::size_t len, std::uint64_t seed) {
  if (desc == "ssn") return speech_shaped_noise(len, seed);
  if (desc == "white") return white_noise(len, seed);
  if (desc.rfind("wav:", 0) == 0) {
    const auto audio = read_wav(desc.substr(4));
    if (std::lround(audio.sample_rate()) != 16000)
      throw IoError("expected 16000 Hz source WAV: " + desc.substr(4));
    std::vector<double> v = audio.vec(0);
    v.resize(len, 0.0);
    return v;
  }
  throw ConfigError("unknown source '" + desc + "' (use ssn, white or wav:<path>)");
}

/// Parses a key=value scene description. Recognized keys:
///   duration_s, better_ear_snr_db, seed, distance_m, reverb_t60, reverb_level_db,
///   target=<azimuth>,<source>
///   interferer=<azimuth>,<source>,<snr_offset_db>     (repeatable)
///   diffuse=<source>,<level_db>[,<n_virtual>]
/// Lines starting with '#' are comments. `seed_override` replaces the file seed.
inline SceneSpec parse_scene(std::istream& in, std::optional<std::uint64_t> seed_override = {}) {
  struct Pending {
    std::string key, value;
  };
  std::vector<Pending> lines;
  double duration = 4.0;
  SceneSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    line.erase(0, line.find_first_not_of(" \t"));
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("scene line lacks '=': " + line);
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "duration_s") duration = std::stod(value);
    else if (key == "better_ear_snr_db") spec.better_ear_snr = std::stod(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else if (key == "distance_m") spec.distance = std::stod(value);
    else if (key == "reverb_t60") spec.reverb_t60 = std::stod(value);
    else if (key == "reverb_level_db") spec.reverb_level_db = std::stod(value);
    else if (key == "target" || key == "interferer" || key == "diffuse") lines.push_back({key, value});
    else throw ConfigError("unknown scene key: " + key);
  }
  if (seed_override) spec.seed = *seed_override;
  if (!(duration > 0.0)) throw ConfigError("duration_s must be positive");
  const auto len = static_cast<std::size_t>(std::llround(duration * kSampleRate));

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      out.push_back(tok);
    }
    return out;
  };
  bool have_target = false;
  std::uint64_t idx = 0;
  for (const auto& [key, value] : lines) {
    const auto f = split(value);
    const std::uint64_t sub_seed = spec.seed * 1000 + ++idx;
    if (key == "target") {
      if (f.size() != 2) throw ConfigError("target expects <azimuth>,<source>");
      spec.target = {std::stod(f[0]), make_source_signal(f[1], len, sub_seed)};
      have_target = true;
    } else if (key == "interferer") {
      if (f.size() != 3) throw ConfigError("interferer expects <azimuth>,<source>,<snr_offset_db>");
      spec.interferers.push_back({std::stod(f[0]), make_source_signal(f[1], len, sub_seed), std::stod(f[2])});
    } else {
      if (f.size() != 2 && f.size() != 3) throw ConfigError("diffuse expects <source>,<level_db>[,<n_virtual>]");
      DiffuseSpec d{make_source_signal(f[0], len, sub_seed), std::stod(f[1]), 36};
      if (f.size() == 3) d.n_virtual = std::stoul(f[2]);
      spec.diffuse = std::move(d);
    }
  }
  if (!have_target) throw ConfigError("scene has no target");
  spec.validate();
  return spec;
}

inline SceneSpec load_scene_file(const std::string& path, std::optional<std::uint64_t> seed_override = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file: " + path);
  return parse_scene(in, seed_override);
}

}  // namespace gcfs
