// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcfs/gcfs.hpp"

namespace {

using namespace gcfs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;

/// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  std::string weights;
  std::optional<std::uint64_t> random_seed;
  double gain_db = 0.0;
  double mic_spacing = 0.011;
  double head_width = 0.15;
  std::string atf;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--weights", f.weights, "GCFSnet weight container (.gcfs)");
  cmd->add_option("--random-weights", f.random_seed, "use random GCFSnet weights from this seed");
  cmd->add_option("--gain-db", f.gain_db, "gain of the 'gain' algorithm in dB");
  cmd->add_option("--mic-spacing", f.mic_spacing, "front-back spacing per device in m")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--head-width", f.head_width, "left-right device distance in m")->check(CLI::PositiveNumber);
  cmd->add_option("--atf", f.atf, "MVDR transfer-function CSV replacing the free-field model");
}

ArrayGeometry geometry_of(const ModelFlags& f) { return ArrayGeometry::hearing_aids(f.mic_spacing, f.head_width); }

std::unique_ptr<FrameProcessor> build(const std::string& algo, const ModelFlags& f) {
  if (needs_weights(algo) && f.weights.empty() && !f.random_seed)
    throw UsageError(algo + " requires --weights <file.gcfs> (or --random-weights SEED)");
  ProcessorOptions opt;
  opt.geometry = geometry_of(f);
  opt.gain_db = f.gain_db;
  opt.weights_path = f.weights;
  opt.random_weights_seed = f.random_seed;
  if (!f.atf.empty()) opt.atf = load_atf_csv(f.atf, StftConfig{}.n_bins());
  return make_processor(algo, opt);
}

MultichannelAudio read_input(const std::string& path) {
  auto audio = read_wav(path);
  if (std::lround(audio.sample_rate()) != 16000)
    throw IoError("expected 16000 Hz input, got " + std::to_string(std::lround(audio.sample_rate())) + " Hz: " +
                  path);
  if (audio.channels() != kNumMics)
    throw IoError("expected a 4-channel WAV (FL, FR, BL, BR), got " + std::to_string(audio.channels()) +
                  " channels: " + path);
  return audio;
}

WavFormat wav_format(const std::string& s) { return s == "pcm16" ? WavFormat::kPcm16 : WavFormat::kFloat32; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

SceneSpec default_sweep_scene(std::uint64_t seed) {
  SceneSpec s;
  s.interferers.push_back({60.0, speech_shaped_noise(16000, seed + 1), 0.0});
  s.interferers.push_back({-60.0, speech_shaped_noise(16000, seed + 2), 0.0});
  s.seed = seed;
  return s;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Four-microphone binaural hearing-aid speech enhancement"};
  app.set_version_flag("--version", "gcfs 1.0.0");
  app.require_subcommand(1);
  const std::vector<std::string> algos = algorithm_names();

  // enhance
  auto* enhance = app.add_subcommand("enhance", "process a 4-channel 16 kHz WAV into a 2-channel WAV");
  std::string algo, in_path, out_path, format = "f32";
  ModelFlags mf;
  enhance->add_option("--algo", algo, "algorithm")->required()->check(CLI::IsMember(algos));
  enhance->add_option("--in", in_path, "input WAV (FL, FR, BL, BR)")->required();
  enhance->add_option("--out", out_path, "output WAV (left, right)")->required();
  enhance->add_option("--format", format, "output sample format")->check(CLI::IsMember({"f32", "pcm16"}));
  add_model_flags(enhance, mf);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "render a scene file to mixture and reference WAVs");
  std::string spec_path, mix_path, ref_path, noise_path;
  std::optional<std::uint64_t> sim_seed;
  double sim_spacing = 0.011, sim_width = 0.15;
  simulate->add_option("--spec", spec_path, "scene description (key=value lines)")->required();
  simulate->add_option("--out-mix", mix_path, "4-channel mixture WAV")->required();
  simulate->add_option("--out-ref", ref_path, "2-channel clean target at the front mics")->required();
  simulate->add_option("--out-noise", noise_path, "4-channel noise-only WAV");
  simulate->add_option("--seed", sim_seed, "overrides the scene file seed");
  simulate->add_option("--mic-spacing", sim_spacing, "front-back spacing per device in m")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--head-width", sim_width, "left-right device distance in m")->check(CLI::PositiveNumber);

  // beampattern
  auto* beam = app.add_subcommand("beampattern", "attenuation over incidence angle (-180..180 deg, 5 deg steps)");
  std::string bp_algo, bp_out;
  std::size_t bp_utt = 20;
  double bp_seconds = 1.0, bp_distance = 1.5, bp_warmup = -1.0;
  std::uint64_t bp_seed = 1;
  ModelFlags bf;
  beam->add_option("--algo", bp_algo, "algorithm")->required()->check(CLI::IsMember(algos));
  beam->add_option("--out", bp_out, "CSV output")->required();
  beam->add_option("--utterances", bp_utt, "probe segments averaged per angle")->check(CLI::PositiveNumber);
  beam->add_option("--segment-seconds", bp_seconds, "length of one probe segment")->check(CLI::PositiveNumber);
  beam->add_option("--distance", bp_distance, "source distance in m")->check(CLI::Range(0.5, 1000.0));
  beam->add_option("--warmup", bp_warmup, "adaptation time before measuring, s (default: 2 adaptive, 0.25 fixed)");
  beam->add_option("--seed", bp_seed, "probe seed");
  add_model_flags(beam, bf);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "SI-SDR and noise attenuation over -5..10 dB better-ear SNR");
  std::string sw_algos, sw_out, sw_scene;
  std::size_t sw_sentences = 20;
  double sw_seconds = 2.0;
  std::uint64_t sw_seed = 1;
  ModelFlags sf;
  sweep->add_option("--algos", sw_algos, "comma-separated algorithms")->required();
  sweep->add_option("--out", sw_out, "CSV output")->required();
  sweep->add_option("--sentences", sw_sentences, "sentences per SNR")->check(CLI::PositiveNumber);
  sweep->add_option("--sentence-seconds", sw_seconds, "length of one sentence")->check(CLI::PositiveNumber);
  sweep->add_option("--scene", sw_scene, "scene file supplying noise sources (default: interferers at +-60 deg)");
  sweep->add_option("--seed", sw_seed, "seed for sentences and noise");
  add_model_flags(sweep, sf);

  // bench
  auto* bench = app.add_subcommand("bench", "real-time factor and per-frame timing");
  std::string bn_algo;
  double bn_seconds = 30.0;
  std::size_t bn_reps = 1;
  std::uint64_t bn_seed = 1;
  ModelFlags nf;
  bench->add_option("--algo", bn_algo, "algorithm")->required()->check(CLI::IsMember(algos));
  bench->add_option("--seconds", bn_seconds, "audio length")->check(CLI::PositiveNumber);
  bench->add_option("--repetitions", bn_reps, "passes over the audio")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bn_seed, "input noise seed");
  add_model_flags(bench, nf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*enhance) {
      auto proc = build(algo, mf);
      const auto x = read_input(in_path);
      StreamStats st;
      const auto y = process_stream(*proc, x, &st);
      write_wav(out_path, y, wav_format(format));
      std::cerr << proc->name() << ": " << x.frames() << " samples, latency " << proc->latency()
                << " samples, clipped in/out " << st.input_clipped << "/" << st.output_clipped << "\n";
    } else if (*simulate) {
      const auto spec = load_scene_file(spec_path, sim_seed);
      const auto sc = mix_scene(spec, ArrayGeometry::hearing_aids(sim_spacing, sim_width));
      write_wav(mix_path, sc.mixture);
      write_wav(ref_path, sc.target_ref);
      if (!noise_path.empty()) write_wav(noise_path, sc.noise_ref);
      std::cerr << "better-ear SNR " << better_ear_snr_db(sc.target_ref, sc.noise_ref) << " dB, "
                << sc.mixture.frames() << " samples\n";
    } else if (*beam) {
      auto proc = build(bp_algo, bf);
      const auto seg = static_cast<std::size_t>(std::llround(bp_seconds * kSampleRate));
      const auto probe = speech_shaped_noise(seg * bp_utt, bp_seed);
      BeamPatternOptions opt;
      opt.distance = bp_distance;
      opt.warmup_s = bp_warmup;
      const auto bp = beam_pattern(*proc, geometry_of(bf), probe, bp_utt, opt);
      auto out = open_out(bp_out);
      write_beam_pattern_csv(out, bp);
    } else if (*sweep) {
      std::vector<std::unique_ptr<FrameProcessor>> owned;
      std::vector<const FrameProcessor*> procs;
      for (const auto& a : split_list(sw_algos)) {
        if (std::find(algos.begin(), algos.end(), a) == algos.end())
          throw UsageError("unknown algorithm in --algos: " + a);
        owned.push_back(build(a, sf));
        procs.push_back(owned.back().get());
      }
      if (procs.empty()) throw UsageError("--algos is empty");
      SceneSpec tmpl = sw_scene.empty() ? default_sweep_scene(sw_seed) : load_scene_file(sw_scene, sw_seed);
      const auto snrs = sweep_snrs();
      const auto rep = snr_sweep(procs, tmpl, geometry_of(sf), snrs, sw_sentences,
                                 default_sentences(sw_seed, sw_seconds));
      auto out = open_out(sw_out);
      write_sweep_csv(out, rep);
    } else if (*bench) {
      auto proc = build(bn_algo, nf);
      const auto frames = static_cast<std::size_t>(std::llround(bn_seconds * kSampleRate));
      MultichannelAudio x(kNumMics, frames);
      for (std::size_t c = 0; c < kNumMics; ++c) x.vec(c) = white_noise(frames, bn_seed * 4 + c);
      const auto r = measure_rtf(*proc, x, bn_reps);
      std::cout << "algorithm " << proc->name() << "\n"
                << "audio_seconds " << r.audio_seconds << "\n"
                << "wall_seconds " << r.wall_seconds << "\n"
                << "rtf " << r.rtf << "\n"
                << "frames " << r.frames << "\n"
                << "frame_p50_us " << r.per_frame_p50_us << "\n"
                << "frame_p95_us " << r.per_frame_p95_us << "\n"
                << "frame_p99_us " << r.per_frame_p99_us << "\n"
                << "deadline_us " << r.deadline_us << "\n"
                << "deadline_misses " << r.deadline_misses << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    std::cerr << "run with --help for the list of flags\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: malformed number: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
