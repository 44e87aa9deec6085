// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcfs/adm.hpp"
#include "gcfs/engine.hpp"
#include "gcfs/gcfsnet.hpp"
#include "gcfs/geometry.hpp"
#include "gcfs/mvdr.hpp"

namespace gcfs {

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names{"bypass", "gain", "adm", "mvdr", "gcfs-m", "gcfs-b"};
  return names;
}

struct ProcessorOptions {
  ArrayGeometry geometry = ArrayGeometry::hearing_aids();
  double gain_db = 0.0;
  std::string weights_path;
  /// Random weights instead of a file (benchmarks, structural tests).
  std::optional<std::uint64_t> random_weights_seed;
  std::optional<AtfTable> atf;
};

inline bool needs_weights(const std::string& algo) { return algo == "gcfs-m" || algo == "gcfs-b"; }

inline std::unique_ptr<FrameProcessor> make_processor(const std::string& algo, const ProcessorOptions& opt = {}) {
  if (algo == "bypass") return std::make_unique<BypassProcessor>();
  if (algo == "gain") return std::make_unique<GainProcessor>(opt.gain_db);
  if (algo == "adm") {
    AdmConfig cfg;
    cfg.mic_spacing = opt.geometry.distance(kFrontLeft, kBackLeft);
    cfg.speed_of_sound = opt.geometry.speed_of_sound;
    return std::make_unique<AdmProcessor>(cfg);
  }
  if (algo == "mvdr") return std::make_unique<MvdrProcessor>(opt.geometry, MvdrConfig{}, opt.atf);
  if (needs_weights(algo)) {
    const Variant v = algo == "gcfs-b" ? Variant::kBinaural : Variant::kMonaural;
    std::shared_ptr<const GcfsModel<float>> model;
    if (opt.random_weights_seed)
      model = std::make_shared<const GcfsModel<float>>(
          GcfsParameters::random(GcfsConfig::make(v), *opt.random_weights_seed));
    else if (!opt.weights_path.empty())
      model = load_gcfs_model(opt.weights_path, v);
    else
      throw ConfigError(algo + " requires a weights file");
    return std::make_unique<GcfsProcessor>(model);
  }
  throw ConfigError("unknown algorithm: " + algo);
}

}  // namespace gcfs
