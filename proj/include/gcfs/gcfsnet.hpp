// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gcfs/engine.hpp"
#include "gcfs/gcfs_config.hpp"
#include "gcfs/weights_io.hpp"

namespace gcfs {

// ---------------------------------------------------------------------------
// Layer primitives. Matrices are input-major: W[i * n_out + o].
// ---------------------------------------------------------------------------

template <typename T>
struct DenseParams {
  std::vector<T> weight, bias;
  std::size_t n_in = 0, n_out = 0;
};

/// y = act(x^T W + b) without shape checks; `y` must not alias `x`.
template <typename T>
inline void dense_forward(std::span<const T> x, const DenseParams<T>& p, std::span<T> y,
                          bool apply_tanh) {
  std::copy(p.bias.begin(), p.bias.end(), y.begin());
  const T* w = p.weight.data();
  for (std::size_t i = 0; i < p.n_in; ++i, w += p.n_out) {
    const T xi = x[i];
    for (std::size_t o = 0; o < p.n_out; ++o) y[o] += xi * w[o];
  }
  if (apply_tanh)
    for (std::size_t o = 0; o < p.n_out; ++o) y[o] = std::tanh(y[o]);
}

/// Fully connected layer with tanh activation; every output lies in (-1, 1).
template <typename T>
inline std::vector<T> fc_tanh(std::span<const T> x, std::span<const T> weightmat,
                              std::span<const T> bias) {
  const std::size_t n_out = bias.size();
  if (n_out == 0 || weightmat.size() != x.size() * n_out)
    throw ConfigError("fc_tanh: weight matrix shape does not match input/bias sizes");
  DenseParams<T> p{{weightmat.begin(), weightmat.end()}, {bias.begin(), bias.end()}, x.size(), n_out};
  std::vector<T> y(n_out);
  dense_forward<T>(x, p, y, true);
  return y;
}

/// Depthwise-separable causal convolution over time: per-feature FIR over the
/// last `kernel` frames, then a pointwise mix with tanh.
template <typename T>
struct DsConvParams {
  std::size_t kernel = 0, features = 0;
  std::vector<T> depthwise;  // [kernel, features]; row kernel-1 weights the current frame
  DenseParams<T> pointwise;
};

template <typename T>
struct DsConvState {
  std::vector<T> history;  // [kernel - 1, features], oldest first
  std::vector<T> scratch;

  DsConvState() = default;
  DsConvState(std::size_t kernel, std::size_t features)
      : history((kernel - 1) * features, T(0)), scratch(features, T(0)) {}
  void reset() { std::fill(history.begin(), history.end(), T(0)); }
};

template <typename T>
inline void ds_conv_causal_step(DsConvState<T>& st, std::span<const T> x, const DsConvParams<T>& p,
                                std::span<T> y) {
  const std::size_t K = p.kernel, U = p.features;
  auto& z = st.scratch;
  for (std::size_t u = 0; u < U; ++u) z[u] = p.depthwise[(K - 1) * U + u] * x[u];
  for (std::size_t k = 0; k + 1 < K; ++k)
    for (std::size_t u = 0; u < U; ++u) z[u] += p.depthwise[k * U + u] * st.history[k * U + u];
  if (K > 1) {
    std::copy(st.history.begin() + static_cast<long>(U), st.history.end(), st.history.begin());
    std::copy(x.begin(), x.end(), st.history.end() - static_cast<long>(U));
  }
  dense_forward<T>(std::span<const T>(z), p.pointwise, y, true);
}

/// Gated recurrent unit with the reset gate applied before the recurrent
/// candidate projection. Gates packed (z, r, h) along the output axis.
template <typename T>
struct GruParams {
  std::size_t units = 0;
  std::vector<T> kernel;     // [units, 3 units]
  std::vector<T> recurrent;  // [units, 3 units]
  std::vector<T> bias;       // [3 units]
};

template <typename T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

/// Updates `h` in place. `scratch` must hold at least 6 * units values.
template <typename T>
inline void gru_cell(std::span<T> h, std::span<const T> x, const GruParams<T>& p, std::span<T> scratch) {
  const std::size_t U = p.units, U3 = 3 * U;
  T* gx = scratch.data();        // 3U: x^T K + b
  T* gh = gx + U3;               // 2U: h^T R for z and r
  T* rh = gh + 2 * U;            // U
  std::copy(p.bias.begin(), p.bias.end(), gx);
  for (std::size_t i = 0; i < U; ++i) {
    const T xi = x[i];
    const T* k = p.kernel.data() + i * U3;
    for (std::size_t o = 0; o < U3; ++o) gx[o] += xi * k[o];
  }
  std::fill(gh, gh + 2 * U, T(0));
  for (std::size_t i = 0; i < U; ++i) {
    const T hi = h[i];
    const T* r = p.recurrent.data() + i * U3;
    for (std::size_t o = 0; o < 2 * U; ++o) gh[o] += hi * r[o];
  }
  // z -> gx[0:U], r -> gx[U:2U]
  for (std::size_t o = 0; o < 2 * U; ++o) gx[o] = sigmoid(gx[o] + gh[o]);
  // candidate: tanh(W_h x + U_h (r * h) + b_h); gh is free again
  for (std::size_t i = 0; i < U; ++i) gh[i] = gx[U + i] * h[i];
  std::fill(rh, rh + U, T(0));
  for (std::size_t i = 0; i < U; ++i) {
    const T v = gh[i];
    const T* r = p.recurrent.data() + i * U3 + 2 * U;
    for (std::size_t o = 0; o < U; ++o) rh[o] += v * r[o];
  }
  for (std::size_t o = 0; o < U; ++o) {
    const T cand = std::tanh(gx[2 * U + o] + rh[o]);
    const T z = gx[o];
    h[o] = (T(1) - z) * h[o] + z * cand;
  }
}

/// Group communication with group mixing: shared U -> P/G map per group,
/// P x P mixing across groups, shared P/G -> U map back, plus the input.
template <typename T>
struct GroupCommParams {
  std::size_t groups = 0, units = 0, group_size = 0;
  DenseParams<T> down, mix, up;
};

template <typename T>
struct GroupCommScratch {
  std::vector<T> latent, mixed, back;
  explicit GroupCommScratch(std::size_t latent_size = 0, std::size_t units = 0)
      : latent(latent_size), mixed(latent_size), back(units) {}
};

/// `x` holds G contiguous groups of `units` values and is updated in place.
template <typename T>
inline void group_communicate(std::span<T> x, const GroupCommParams<T>& p, GroupCommScratch<T>& s) {
  const std::size_t G = p.groups, U = p.units, Pg = p.group_size;
  for (std::size_t g = 0; g < G; ++g)
    dense_forward<T>(x.subspan(g * U, U), p.down, std::span<T>(s.latent).subspan(g * Pg, Pg), true);
  dense_forward<T>(std::span<const T>(s.latent), p.mix, std::span<T>(s.mixed), true);
  for (std::size_t g = 0; g < G; ++g) {
    dense_forward<T>(std::span<const T>(s.mixed).subspan(g * Pg, Pg), p.up, std::span<T>(s.back), true);
    for (std::size_t u = 0; u < U; ++u) x[g * U + u] += s.back[u];
  }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Complex spatial filter W (filter channels x bins), postfilter C and the
/// range r bounding every real and imaginary part.
struct FilterSet {
  std::size_t channels = 0, n_bins = 0;
  std::vector<Complex> w;  // [channel * n_bins + k]
  std::vector<Complex> c;
  double r = 0.0;

  FilterSet() = default;
  FilterSet(std::size_t ch, std::size_t bins) : channels(ch), n_bins(bins), w(ch * bins), c(bins) {}
  Complex& W(std::size_t m, std::size_t k) { return w[m * n_bins + k]; }
  Complex W(std::size_t m, std::size_t k) const { return w[m * n_bins + k]; }
};

/// Immutable network weights in scalar type T; shareable across threads.
template <typename T = float>
class GcfsModel {
 public:
  explicit GcfsModel(const GcfsParameters& p) : cfg_(p.config) {
    cfg_.validate();
    for (const auto& s : tensor_layout(cfg_))
      if (p.at(s.name).size() != s.numel()) throw WeightsError("size mismatch for tensor " + s.name);
    input_scale_ = static_cast<T>(p.input_scale);
    r_ = static_cast<T>(p.r);
    const std::size_t U = cfg_.hidden, Pg = cfg_.group_size(), P = cfg_.latent;
    grouping_ = dense(p, "grouping.fc", cfg_.input_size(), P);
    conv_fc_ = dense(p, "conv.fc", Pg, U);
    ds1_ = ds(p, "conv.ds1", cfg_.conv1_kernel);
    ds2_ = ds(p, "conv.ds2", cfg_.conv2_kernel);
    conv_skip_ = vec(p, "conv.skip.scale");
    gc1_ = gc(p, "gc1");
    gru1_ = gru(p, "gru1");
    gru2_ = gru(p, "gru2");
    gru_skip_ = vec(p, "gru.skip.scale");
    gc2_ = gc(p, "gc2");
    out_fc_ = dense(p, "out.fc", U, Pg);
    head_w_ = dense(p, "head_w", P, 2 * cfg_.filter_channels() * cfg_.n_bins);
    head_c_ = dense(p, "head_c", P, 2 * cfg_.n_bins);
  }

  const GcfsConfig& config() const { return cfg_; }
  T input_scale() const { return input_scale_; }
  T range() const { return r_; }

  const DenseParams<T>& grouping() const { return grouping_; }
  const DenseParams<T>& conv_fc() const { return conv_fc_; }
  const DsConvParams<T>& ds1() const { return ds1_; }
  const DsConvParams<T>& ds2() const { return ds2_; }
  const std::vector<T>& conv_skip() const { return conv_skip_; }
  const GroupCommParams<T>& gc1() const { return gc1_; }
  const GroupCommParams<T>& gc2() const { return gc2_; }
  const GruParams<T>& gru1() const { return gru1_; }
  const GruParams<T>& gru2() const { return gru2_; }
  const std::vector<T>& gru_skip() const { return gru_skip_; }
  const DenseParams<T>& out_fc() const { return out_fc_; }
  const DenseParams<T>& head_w() const { return head_w_; }
  const DenseParams<T>& head_c() const { return head_c_; }

 private:
  static std::vector<T> vec(const GcfsParameters& p, const std::string& name) {
    const auto& v = p.at(name);
    return {v.begin(), v.end()};
  }
  static DenseParams<T> dense(const GcfsParameters& p, const std::string& name, std::size_t in,
                              std::size_t out) {
    return {vec(p, name + ".weight"), vec(p, name + ".bias"), in, out};
  }
  DsConvParams<T> ds(const GcfsParameters& p, const std::string& name, std::size_t k) const {
    const std::size_t U = cfg_.hidden;
    return {k, U, vec(p, name + ".depthwise"), {vec(p, name + ".pointwise"), vec(p, name + ".bias"), U, U}};
  }
  GroupCommParams<T> gc(const GcfsParameters& p, const std::string& name) const {
    const std::size_t U = cfg_.hidden, Pg = cfg_.group_size(), P = cfg_.latent;
    return {cfg_.groups, U, Pg, dense(p, name + ".down", U, Pg), dense(p, name + ".mix", P, P),
            dense(p, name + ".up", Pg, U)};
  }
  GruParams<T> gru(const GcfsParameters& p, const std::string& name) const {
    return {cfg_.hidden, vec(p, name + ".kernel"), vec(p, name + ".recurrent"), vec(p, name + ".bias")};
  }

  GcfsConfig cfg_;
  T input_scale_{1}, r_{1};
  DenseParams<T> grouping_, conv_fc_, out_fc_, head_w_, head_c_;
  DsConvParams<T> ds1_, ds2_;
  std::vector<T> conv_skip_, gru_skip_;
  GroupCommParams<T> gc1_, gc2_;
  GruParams<T> gru1_, gru2_;
};

/// Per-stream recurrent state (convolution delay lines, GRU hidden states)
/// plus preallocated scratch space.
template <typename T = float>
class GcfsState {
 public:
  explicit GcfsState(const GcfsConfig& cfg)
      : cfg_(cfg), gc_scratch_(cfg.latent, cfg.hidden) {
    const std::size_t G = cfg.groups, U = cfg.hidden;
    for (std::size_t g = 0; g < G; ++g) {
      ds1_.emplace_back(cfg.conv1_kernel, U);
      ds2_.emplace_back(cfg.conv2_kernel, U);
    }
    h1_.assign(G * U, T(0));
    h2_.assign(G * U, T(0));
    scaled_.resize(cfg.input_size());
    latent_.resize(cfg.latent);
    groups_.resize(G * U);
    a_.resize(U);
    b_.resize(U);
    gru_scratch_.resize(6 * U);
    heads_w_.resize(2 * cfg.filter_channels() * cfg.n_bins);
    heads_c_.resize(2 * cfg.n_bins);
  }

  void reset() {
    for (auto& s : ds1_) s.reset();
    for (auto& s : ds2_) s.reset();
    std::fill(h1_.begin(), h1_.end(), T(0));
    std::fill(h2_.begin(), h2_.end(), T(0));
  }

  bool all_finite() const {
    auto ok = [](const std::vector<T>& v) {
      return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
    };
    for (const auto& s : ds1_) if (!ok(s.history)) return false;
    for (const auto& s : ds2_) if (!ok(s.history)) return false;
    return ok(h1_) && ok(h2_);
  }

  const GcfsConfig& config() const { return cfg_; }

 private:
  template <typename U>
  friend void infer_frame_into(const GcfsModel<U>&, GcfsState<U>&, std::span<const U>, FilterSet&);

  GcfsConfig cfg_;
  std::vector<DsConvState<T>> ds1_, ds2_;
  std::vector<T> h1_, h2_;
  std::vector<T> scaled_, latent_, groups_, a_, b_, gru_scratch_, heads_w_, heads_c_;
  GroupCommScratch<T> gc_scratch_;
};

/// One frame of inference: features (size B) to filters. The state advances
/// by one frame.
template <typename T>
inline void infer_frame_into(const GcfsModel<T>& model, GcfsState<T>& st, std::span<const T> features,
                             FilterSet& out) {
  const GcfsConfig& cfg = model.config();
  if (!(st.cfg_ == cfg)) throw ConfigError("GCFS state was created for a different config");
  if (features.size() != cfg.input_size()) throw ConfigError("feature vector has the wrong size");
  const std::size_t G = cfg.groups, U = cfg.hidden, Pg = cfg.group_size(), F = cfg.n_bins;
  const std::size_t Mf = cfg.filter_channels();

  // grouping: learned input scale, B -> P projection
  for (std::size_t i = 0; i < features.size(); ++i) st.scaled_[i] = features[i] * model.input_scale();
  dense_forward<T>(std::span<const T>(st.scaled_), model.grouping(), std::span<T>(st.latent_), true);

  // conv module, shared across groups
  for (std::size_t g = 0; g < G; ++g) {
    std::span<T> a(st.a_), b(st.b_);
    std::span<T> out = std::span<T>(st.groups_).subspan(g * U, U);
    dense_forward<T>(std::span<const T>(st.latent_).subspan(g * Pg, Pg), model.conv_fc(), a, true);
    ds_conv_causal_step<T>(st.ds1_[g], a, model.ds1(), b);
    ds_conv_causal_step<T>(st.ds2_[g], b, model.ds2(), out);
    for (std::size_t u = 0; u < U; ++u) out[u] += model.conv_skip()[u] * a[u];
  }
  group_communicate<T>(st.groups_, model.gc1(), st.gc_scratch_);

  // GRU module, shared across groups, with scaled skip
  for (std::size_t g = 0; g < G; ++g) {
    std::span<T> x = std::span<T>(st.groups_).subspan(g * U, U);
    std::span<T> h1 = std::span<T>(st.h1_).subspan(g * U, U);
    std::span<T> h2 = std::span<T>(st.h2_).subspan(g * U, U);
    gru_cell<T>(h1, x, model.gru1(), st.gru_scratch_);
    gru_cell<T>(h2, h1, model.gru2(), st.gru_scratch_);
    for (std::size_t u = 0; u < U; ++u) x[u] = h2[u] + model.gru_skip()[u] * x[u];
  }
  group_communicate<T>(st.groups_, model.gc2(), st.gc_scratch_);

  // back to the latent size and the output heads
  for (std::size_t g = 0; g < G; ++g)
    dense_forward<T>(std::span<const T>(st.groups_).subspan(g * U, U), model.out_fc(),
                     std::span<T>(st.latent_).subspan(g * Pg, Pg), false);
  dense_forward<T>(std::span<const T>(st.latent_), model.head_w(), std::span<T>(st.heads_w_), true);
  dense_forward<T>(std::span<const T>(st.latent_), model.head_c(), std::span<T>(st.heads_c_), true);

  if (out.channels != Mf || out.n_bins != F) out = FilterSet(Mf, F);
  const T r = model.range();
  out.r = static_cast<double>(r);
  for (std::size_t m = 0; m < Mf; ++m)
    for (std::size_t k = 0; k < F; ++k)
      out.W(m, k) = {static_cast<double>(r * st.heads_w_[(2 * m) * F + k]),
                     static_cast<double>(r * st.heads_w_[(2 * m + 1) * F + k])};
  for (std::size_t k = 0; k < F; ++k)
    out.c[k] = {static_cast<double>(r * st.heads_c_[k]), static_cast<double>(r * st.heads_c_[F + k])};
}

template <typename T>
inline FilterSet infer_frame(const GcfsModel<T>& model, GcfsState<T>& st, std::span<const T> features) {
  FilterSet fs;
  infer_frame_into(model, st, features, fs);
  return fs;
}

/// Feature vector for one ear: per channel in `channels` order, the real
/// parts of all bins followed by the imaginary parts.
template <typename T>
inline void build_features(const SpectralFrame& frame, std::span<const std::size_t> channels,
                           std::span<T> out) {
  const std::size_t F = frame.n_bins;
  if (out.size() != channels.size() * 2 * F) throw ConfigError("feature buffer has the wrong size");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto spec = frame.channel(channels[i]);
    T* dst = out.data() + i * 2 * F;
    for (std::size_t k = 0; k < F; ++k) {
      dst[k] = static_cast<T>(spec[k].real());
      dst[F + k] = static_cast<T>(spec[k].imag());
    }
  }
}

/// Filter-and-sum over the local microphones followed by the postfilter:
/// out(k) = C(k) * sum_m Y_m(k) W(m, k).
inline void apply_filters(const SpectralFrame& frame, std::span<const std::size_t> local_channels,
                          const FilterSet& fs, std::span<Complex> out) {
  if (local_channels.size() != fs.channels) throw ConfigError("filter channel count mismatch");
  for (std::size_t k = 0; k < fs.n_bins; ++k) {
    Complex acc = 0.0;
    for (std::size_t m = 0; m < fs.channels; ++m) acc += frame(local_channels[m], k) * fs.W(m, k);
    out[k] = acc * fs.c[k];
  }
}

/// Dichotic GCFSnet processor: one model instance per ear (weights shared),
/// each fed with its own ipsilateral-first channel order.
class GcfsProcessor final : public SpectralProcessor {
 public:
  using Model = GcfsModel<float>;

  GcfsProcessor(std::shared_ptr<const Model> left, std::shared_ptr<const Model> right)
      : models_{std::move(left), std::move(right)},
        states_{GcfsState<float>(models_[0]->config()), GcfsState<float>(models_[1]->config())} {
    if (!(models_[0]->config() == models_[1]->config()))
      throw ConfigError("left and right GCFS models must share one configuration");
    const GcfsConfig& cfg = models_[0]->config();
    if (cfg.n_bins != stft_config().n_bins()) throw ConfigError("model bin count does not match the STFT");
    for (std::size_t e = 0; e < kNumEars; ++e) {
      for (auto role : cfg.channel_order) feature_channels_[e].push_back(channel_for_role(role, e));
      for (auto role : cfg.filter_order) filter_channels_[e].push_back(channel_for_role(role, e));
      features_[e].resize(cfg.input_size());
      filters_[e] = FilterSet(cfg.filter_channels(), cfg.n_bins);
    }
  }

  explicit GcfsProcessor(std::shared_ptr<const Model> shared) : GcfsProcessor(shared, shared) {}

  std::string name() const override {
    return models_[0]->config().variant == Variant::kBinaural ? "gcfs-b" : "gcfs-m";
  }

  std::unique_ptr<FrameProcessor> clone() const override {
    return std::make_unique<GcfsProcessor>(models_[0], models_[1]);
  }

  const FilterSet& last_filters(std::size_t ear) const { return filters_[ear]; }
  std::span<const std::size_t> feature_channels(std::size_t ear) const { return feature_channels_[ear]; }

 protected:
  void reset_state() override {
    for (auto& s : states_) s.reset();
  }

  void process_frame(const SpectralFrame& frame, std::span<Complex> left,
                     std::span<Complex> right) override {
    std::array<std::span<Complex>, kNumEars> out{left, right};
    for (std::size_t e = 0; e < kNumEars; ++e) {
      build_features<float>(frame, feature_channels_[e], features_[e]);
      infer_frame_into<float>(*models_[e], states_[e], features_[e], filters_[e]);
      apply_filters(frame, filter_channels_[e], filters_[e], out[e]);
    }
  }

 private:
  std::array<std::shared_ptr<const Model>, kNumEars> models_;
  std::array<GcfsState<float>, kNumEars> states_;
  std::array<std::vector<std::size_t>, kNumEars> feature_channels_, filter_channels_;
  std::array<std::vector<float>, kNumEars> features_;
  std::array<FilterSet, kNumEars> filters_;
};

/// Loads a `.gcfs` file and checks it against the variant the caller expects.
inline std::shared_ptr<const GcfsModel<float>> load_gcfs_model(const std::string& path, Variant expected) {
  const WeightContainer wc = load_container(path);
  check_compatible(wc, GcfsConfig::make(expected));
  return std::make_shared<const GcfsModel<float>>(from_container(wc));
}

}  // namespace gcfs
