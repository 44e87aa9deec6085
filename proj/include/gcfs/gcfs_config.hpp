// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gcfs/audio.hpp"

namespace gcfs {

enum class Variant { kMonaural, kBinaural };

/// Microphone role relative to the ear being processed.
enum class MicRole { kFrontIpsi, kFrontContra, kBackIpsi, kBackContra };

inline std::string to_string(Variant v) { return v == Variant::kBinaural ? "binaural" : "monaural"; }

inline std::string to_string(MicRole r) {
  switch (r) {
    case MicRole::kFrontIpsi: return "front_ipsi";
    case MicRole::kFrontContra: return "front_contra";
    case MicRole::kBackIpsi: return "back_ipsi";
    case MicRole::kBackContra: return "back_contra";
  }
  return "?";
}

inline MicRole parse_mic_role(const std::string& s) {
  for (auto r : {MicRole::kFrontIpsi, MicRole::kFrontContra, MicRole::kBackIpsi, MicRole::kBackContra})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown microphone role: " + s);
}

/// Engine channel playing role `r` for ear `ear` (0 left, 1 right).
inline std::size_t channel_for_role(MicRole r, std::size_t ear) {
  const bool left = ear == 0;
  switch (r) {
    case MicRole::kFrontIpsi: return left ? kFrontLeft : kFrontRight;
    case MicRole::kFrontContra: return left ? kFrontRight : kFrontLeft;
    case MicRole::kBackIpsi: return left ? kBackLeft : kBackRight;
    case MicRole::kBackContra: return left ? kBackRight : kBackLeft;
  }
  return 0;
}

/// Network hyperparameters. Both variants filter the two ipsilateral
/// microphones; the binaural variant additionally sees the contralateral
/// pair as input features.
struct GcfsConfig {
  Variant variant = Variant::kBinaural;
  std::size_t n_bins = 65;
  std::size_t latent = 128;  // P
  std::size_t groups = 8;    // G
  std::size_t hidden = 32;   // U
  std::size_t conv1_kernel = 5;
  std::size_t conv2_kernel = 3;
  std::vector<MicRole> channel_order;
  std::vector<MicRole> filter_order{MicRole::kFrontIpsi, MicRole::kBackIpsi};

  static std::vector<MicRole> default_order(Variant v) {
    if (v == Variant::kBinaural)
      return {MicRole::kFrontIpsi, MicRole::kFrontContra, MicRole::kBackIpsi, MicRole::kBackContra};
    return {MicRole::kFrontIpsi, MicRole::kBackIpsi};
  }

  static GcfsConfig make(Variant v) {
    GcfsConfig c;
    c.variant = v;
    c.channel_order = default_order(v);
    return c;
  }

  std::size_t feat_channels() const { return channel_order.size(); }
  std::size_t filter_channels() const { return filter_order.size(); }
  std::size_t group_size() const { return latent / groups; }
  std::size_t input_size() const { return feat_channels() * 2 * n_bins; }  // B

  void validate() const {
    if (groups == 0 || latent % groups != 0) throw ConfigError("latent size must be divisible by groups");
    if (hidden == 0 || n_bins == 0) throw ConfigError("sizes must be positive");
    if (conv1_kernel == 0 || conv2_kernel == 0) throw ConfigError("kernel sizes must be positive");
    if (channel_order != default_order(variant))
      throw ConfigError("channel order does not match the " + to_string(variant) + " variant");
    if (filter_order != std::vector<MicRole>{MicRole::kFrontIpsi, MicRole::kBackIpsi})
      throw ConfigError("filtered channels must be the ipsilateral front/back pair");
  }

  friend bool operator==(const GcfsConfig&, const GcfsConfig&) = default;
};

/// Shape and quantization class of one trainable tensor.
struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
  bool is_bias = false;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

/// The complete, ordered tensor set of the architecture. Matrices are stored
/// input-major ([n_in, n_out]); GRU matrices pack gates as (z, r, h).
inline std::vector<TensorSpec> tensor_layout(const GcfsConfig& c) {
  const std::size_t B = c.input_size(), P = c.latent, Pg = c.group_size(), U = c.hidden;
  const std::size_t F = c.n_bins, Mf = c.filter_channels();
  std::vector<TensorSpec> t;
  auto fc = [&](const std::string& name, std::size_t in, std::size_t out) {
    t.push_back({name + ".weight", {in, out}, false});
    t.push_back({name + ".bias", {out}, true});
  };
  auto gc = [&](const std::string& name) {
    fc(name + ".down", U, Pg);
    fc(name + ".mix", P, P);
    fc(name + ".up", Pg, U);
  };
  auto ds = [&](const std::string& name, std::size_t k) {
    t.push_back({name + ".depthwise", {k, U}, false});
    t.push_back({name + ".pointwise", {U, U}, false});
    t.push_back({name + ".bias", {U}, true});
  };
  auto gru = [&](const std::string& name) {
    t.push_back({name + ".kernel", {U, 3 * U}, false});
    t.push_back({name + ".recurrent", {U, 3 * U}, false});
    t.push_back({name + ".bias", {3 * U}, true});
  };
  fc("grouping.fc", B, P);
  fc("conv.fc", Pg, U);
  ds("conv.ds1", c.conv1_kernel);
  ds("conv.ds2", c.conv2_kernel);
  t.push_back({"conv.skip.scale", {U}, false});
  gc("gc1");
  gru("gru1");
  gru("gru2");
  t.push_back({"gru.skip.scale", {U}, false});
  gc("gc2");
  fc("out.fc", U, Pg);
  fc("head_w", P, 2 * Mf * F);
  fc("head_c", P, 2 * F);
  return t;
}

/// Trainable scalars: every tensor element plus the input scale and range r.
inline std::size_t param_count(const GcfsConfig& c) {
  std::size_t n = 2;
  for (const auto& t : tensor_layout(c)) n += t.numel();
  return n;
}

/// key=value lines, one per field, in a fixed order.
inline std::string serialize_config(const GcfsConfig& c) {
  std::ostringstream os;
  auto roles = [](const std::vector<MicRole>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_string(v[i]);
    return s;
  };
  os << "variant=" << to_string(c.variant) << "\n"
     << "n_bins=" << c.n_bins << "\n"
     << "latent=" << c.latent << "\n"
     << "groups=" << c.groups << "\n"
     << "hidden=" << c.hidden << "\n"
     << "conv1_kernel=" << c.conv1_kernel << "\n"
     << "conv2_kernel=" << c.conv2_kernel << "\n"
     << "channel_order=" << roles(c.channel_order) << "\n"
     << "filter_order=" << roles(c.filter_order) << "\n";
  return os.str();
}

/// Parses the block written by serialize_config. Unrecognized keys are
/// returned in `extra` (metadata such as training constants).
inline GcfsConfig parse_config(const std::string& text,
                               std::map<std::string, std::string>* extra = nullptr) {
  GcfsConfig c;
  std::istringstream is(text);
  std::string line;
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line lacks '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config is missing key: " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_size = [&](const std::string& key) {
    const std::string v = take(key);
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("config value is not an integer: " + key);
    return static_cast<std::size_t>(n);
  };
  auto take_roles = [&](const std::string& key) {
    std::vector<MicRole> out;
    std::istringstream rs(take(key));
    std::string tok;
    while (std::getline(rs, tok, ',')) out.push_back(parse_mic_role(tok));
    return out;
  };
  const std::string variant = take("variant");
  if (variant == "binaural") c.variant = Variant::kBinaural;
  else if (variant == "monaural") c.variant = Variant::kMonaural;
  else throw ConfigError("unknown variant: " + variant);
  c.n_bins = take_size("n_bins");
  c.latent = take_size("latent");
  c.groups = take_size("groups");
  c.hidden = take_size("hidden");
  c.conv1_kernel = take_size("conv1_kernel");
  c.conv2_kernel = take_size("conv2_kernel");
  c.channel_order = take_roles("channel_order");
  c.filter_order = take_roles("filter_order");
  if (extra) *extra = std::move(kv);
  return c;
}

}  // namespace gcfs
