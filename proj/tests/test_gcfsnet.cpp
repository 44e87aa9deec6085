// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "gcfs/engine.hpp"
#include "gcfs/gcfsnet.hpp"
#include "test_helpers.hpp"

namespace gcfs {
namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lim = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-lim, lim);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<float> uniform_f(std::size_t n, std::uint64_t seed, double lim = 1.0) {
  const auto v = uniform(n, seed, lim);
  return {v.begin(), v.end()};
}

std::shared_ptr<const GcfsModel<float>> random_model(Variant v, std::uint64_t seed, double r = 2.0) {
  auto p = GcfsParameters::random(GcfsConfig::make(v), seed);
  p.r = r;
  return std::make_shared<const GcfsModel<float>>(p);
}

TEST(FcTanh, Examples) {
  const std::vector<double> x{0.3, -2.0}, w0(6, 0.0), b0(3, 0.0);
  for (double y : fc_tanh<double>(x, w0, b0)) EXPECT_EQ(y, 0.0);

  const std::vector<double> one{1.0}, half{0.5}, zero{0.0};
  EXPECT_NEAR(fc_tanh<double>(one, half, zero)[0], 0.4621, 1e-4);
  EXPECT_DOUBLE_EQ(fc_tanh<double>(one, half, zero)[0], std::tanh(0.5));
}

TEST(FcTanh, OutputsInsideOpenInterval) {
  const auto x = uniform(40, 1, 50.0), w = uniform(40 * 7, 2, 3.0), b = uniform(7, 3);
  for (double y : fc_tanh<double>(x, w, b)) {
    EXPECT_LE(std::abs(y), 1.0);
    EXPECT_TRUE(std::isfinite(y));
  }
  const auto small = fc_tanh<double>(uniform(4, 4, 0.1), uniform(8, 5, 0.1), uniform(2, 6, 0.1));
  for (double y : small) EXPECT_LT(std::abs(y), 1.0);
}

TEST(FcTanh, MatchesDirectEvaluation) {
  const auto x = uniform(5, 7), w = uniform(15, 8), b = uniform(3, 9);
  const auto y = fc_tanh<double>(x, w, b);
  for (std::size_t o = 0; o < 3; ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < 5; ++i) acc += x[i] * w[i * 3 + o];
    EXPECT_NEAR(y[o], std::tanh(acc), 1e-15);
  }
}

TEST(FcTanh, ShapeMismatchThrows) {
  const std::vector<double> x(3), w(5), b(2);
  EXPECT_THROW(fc_tanh<double>(x, w, b), ConfigError);
}

DsConvParams<double> identity_ds(std::size_t K, std::size_t U) {
  DsConvParams<double> p;
  p.kernel = K;
  p.features = U;
  p.depthwise.assign(K * U, 1.0);
  p.pointwise = {std::vector<double>(U * U, 0.0), std::vector<double>(U, 0.0), U, U};
  for (std::size_t u = 0; u < U; ++u) p.pointwise.weight[u * U + u] = 1.0;
  return p;
}

TEST(DsConv, ZeroStreamGivesZero) {
  const auto p = identity_ds(5, 4);
  DsConvState<double> st(5, 4);
  std::vector<double> x(4, 0.0), y(4);
  for (int t = 0; t < 10; ++t) {
    ds_conv_causal_step<double>(st, x, p, y);
    for (double v : y) EXPECT_EQ(v, 0.0);
  }
}

TEST(DsConv, ImpulseHasFiniteSupport) {
  for (std::size_t K : {5u, 3u}) {
    const auto p = identity_ds(K, 4);
    DsConvState<double> st(K, 4);
    std::vector<double> y(4);
    for (std::size_t t = 0; t < 12; ++t) {
      std::vector<double> x(4, t == 0 ? 0.5 : 0.0);
      ds_conv_causal_step<double>(st, x, p, y);
      for (double v : y) {
        if (t < K) {
          EXPECT_NEAR(v, std::tanh(0.5), 1e-15) << K << " " << t;
        } else {
          EXPECT_EQ(v, 0.0) << K << " " << t;
        }
      }
    }
  }
}

TEST(DsConv, FutureInputDoesNotAffectPast) {
  DsConvParams<double> p;
  p.kernel = 5;
  p.features = 6;
  p.depthwise = uniform(30, 11);
  p.pointwise = {uniform(36, 12), uniform(6, 13), 6, 6};
  DsConvState<double> a(5, 6), b(5, 6);
  std::vector<double> ya(6), yb(6);
  for (std::size_t t = 0; t < 20; ++t) {
    auto x = uniform(6, 100 + t);
    ds_conv_causal_step<double>(a, x, p, ya);
    if (t >= 10)
      for (auto& v : x) v += 1.0;
    ds_conv_causal_step<double>(b, x, p, yb);
    if (t < 10) {
      EXPECT_EQ(ya, yb) << t;
    }
  }
}

GruParams<double> zero_gru(std::size_t U) {
  return {U, std::vector<double>(3 * U * U, 0.0), std::vector<double>(3 * U * U, 0.0),
          std::vector<double>(3 * U, 0.0)};
}

TEST(Gru, ZeroParametersHalveState) {
  auto p = zero_gru(4);
  std::vector<double> h{0.2, -0.8, 1.0, 0.0}, x(4, 0.7), scratch(24);
  gru_cell<double>(h, x, p, scratch);
  EXPECT_EQ(h, (std::vector<double>{0.1, -0.4, 0.5, 0.0}));
  std::vector<double> h0(4, 0.0);
  gru_cell<double>(h0, x, p, scratch);
  for (double v : h0) EXPECT_EQ(v, 0.0);
}

// Plain per-gate matrices, written independently of the packed layout.
std::vector<double> reference_gru(const std::vector<double>& h, const std::vector<double>& x,
                                  const double Wz[3][3], const double Wr[3][3], const double Wh[3][3],
                                  const double Uz[3][3], const double Ur[3][3], const double Uh[3][3],
                                  const double bz[3], const double br[3], const double bh[3]) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double z[3], r[3], out[3];
  for (int o = 0; o < 3; ++o) {
    double az = bz[o], ar = br[o];
    for (int i = 0; i < 3; ++i) {
      az += Wz[o][i] * x[i] + Uz[o][i] * h[i];
      ar += Wr[o][i] * x[i] + Ur[o][i] * h[i];
    }
    z[o] = sig(az);
    r[o] = sig(ar);
  }
  for (int o = 0; o < 3; ++o) {
    double ah = bh[o];
    for (int i = 0; i < 3; ++i) ah += Wh[o][i] * x[i] + Uh[o][i] * (r[i] * h[i]);
    out[o] = (1.0 - z[o]) * h[o] + z[o] * std::tanh(ah);
  }
  return {out[0], out[1], out[2]};
}

TEST(Gru, MatchesHandRolledReference) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> d(-0.8, 0.8);
  double W[3][3][3], Uh[3][3][3], b[3][3];
  for (auto& g : W)
    for (auto& row : g)
      for (auto& v : row) v = d(rng);
  for (auto& g : Uh)
    for (auto& row : g)
      for (auto& v : row) v = d(rng);
  for (auto& g : b)
    for (auto& v : g) v = d(rng);

  GruParams<double> p = zero_gru(3);
  for (int g = 0; g < 3; ++g)
    for (int o = 0; o < 3; ++o) {
      p.bias[g * 3 + o] = b[g][o];
      for (int i = 0; i < 3; ++i) {
        p.kernel[i * 9 + g * 3 + o] = W[g][o][i];
        p.recurrent[i * 9 + g * 3 + o] = Uh[g][o][i];
      }
    }
  std::vector<double> h{0.1, -0.3, 0.6}, scratch(18);
  for (int t = 0; t < 8; ++t) {
    const auto x = uniform(3, 300 + t);
    const auto ref = reference_gru(h, x, W[0], W[1], W[2], Uh[0], Uh[1], Uh[2], b[0], b[1], b[2]);
    gru_cell<double>(h, x, p, scratch);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(h[i], ref[i], 1e-9);
  }
}

GroupCommParams<double> random_gc(std::size_t G, std::size_t U, std::size_t Pg, std::uint64_t seed) {
  const std::size_t P = G * Pg;
  return {G, U, Pg, {uniform(U * Pg, seed), uniform(Pg, seed + 1), U, Pg},
          {uniform(P * P, seed + 2), uniform(P, seed + 3), P, P},
          {uniform(Pg * U, seed + 4), uniform(U, seed + 5), Pg, U}};
}

TEST(GroupCommunicate, ZeroParametersAreIdentity) {
  GroupCommParams<double> p{4, 5, 3, {std::vector<double>(15, 0.0), std::vector<double>(3, 0.0), 5, 3},
                            {std::vector<double>(144, 0.0), std::vector<double>(12, 0.0), 12, 12},
                            {std::vector<double>(15, 0.0), std::vector<double>(5, 0.0), 3, 5}};
  GroupCommScratch<double> s(12, 5);
  auto x = uniform(20, 21);
  const auto x0 = x;
  group_communicate<double>(x, p, s);
  EXPECT_EQ(x, x0);
}

TEST(GroupCommunicate, PermutationEquivariantWithIdentityMixing) {
  const std::size_t G = 4, U = 5, Pg = 3, P = G * Pg;
  auto p = random_gc(G, U, Pg, 31);
  std::fill(p.mix.weight.begin(), p.mix.weight.end(), 0.0);
  std::fill(p.mix.bias.begin(), p.mix.bias.end(), 0.0);
  for (std::size_t i = 0; i < P; ++i) p.mix.weight[i * P + i] = 1.0;
  GroupCommScratch<double> s(P, U);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const auto x = uniform(G * U, 33);
  std::vector<double> xp(G * U);
  for (std::size_t g = 0; g < G; ++g)
    std::copy_n(x.begin() + perm[g] * U, U, xp.begin() + g * U);
  auto y = x, yp = xp;
  group_communicate<double>(y, p, s);
  group_communicate<double>(yp, p, s);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t u = 0; u < U; ++u) EXPECT_NEAR(yp[g * U + u], y[perm[g] * U + u], 1e-14);
}

TEST(GroupCommunicate, SkipDeltaBounded) {
  const auto p = random_gc(8, 32, 16, 41);
  GroupCommScratch<double> s(128, 32);
  auto x = uniform(256, 43, 20.0);
  const auto x0 = x;
  group_communicate<double>(x, p, s);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(std::abs(x[i] - x0[i]), 1.0);
}

TEST(InferFrame, ZeroWeightsGiveZeroFilters) {
  const auto cfg = GcfsConfig::make(Variant::kBinaural);
  GcfsModel<float> model(GcfsParameters::zeros(cfg));
  GcfsState<float> st(cfg);
  const auto feat = uniform_f(cfg.input_size(), 51, 30.0);
  const auto fs = infer_frame(model, st, std::span<const float>(feat));
  for (const auto& w : fs.w) EXPECT_EQ(w, Complex(0.0, 0.0));
  for (const auto& c : fs.c) EXPECT_EQ(c, Complex(0.0, 0.0));
}

TEST(InferFrame, RangeBoundOver10kFrames) {
  for (Variant v : {Variant::kMonaural, Variant::kBinaural}) {
    auto p = GcfsParameters::random(GcfsConfig::make(v), 61);
    p.r = 1.7;
    p.input_scale = 3.0;
    GcfsModel<float> model(p);
    GcfsState<float> st(p.config);
    FilterSet fs;
    std::mt19937_64 rng(62);
    std::normal_distribution<float> d(0.0f, 5.0f);
    std::vector<float> feat(p.config.input_size());
    double peak = 0.0;
    for (int t = 0; t < 10000; ++t) {
      for (auto& x : feat) x = d(rng);
      infer_frame_into(model, st, std::span<const float>(feat), fs);
      for (const auto& w : fs.w) peak = std::max({peak, std::abs(w.real()), std::abs(w.imag())});
      for (const auto& c : fs.c) peak = std::max({peak, std::abs(c.real()), std::abs(c.imag())});
    }
    EXPECT_LE(peak, static_cast<double>(1.7f));
    EXPECT_GT(peak, 0.0);
    EXPECT_TRUE(st.all_finite());
  }
}

TEST(InferFrame, CausalAndDeterministic) {
  const auto cfg = GcfsConfig::make(Variant::kBinaural);
  GcfsModel<float> model(GcfsParameters::random(cfg, 71));
  GcfsState<float> a(cfg), b(cfg);
  std::vector<FilterSet> first;
  for (int t = 0; t < 30; ++t) {
    auto f = uniform_f(cfg.input_size(), 700 + t, 4.0);
    first.push_back(infer_frame(model, a, std::span<const float>(f)));
    if (t >= 20)
      for (auto& x : f) x = -x;
    const auto fb = infer_frame(model, b, std::span<const float>(f));
    if (t < 20) {
      EXPECT_EQ(fb.w, first.back().w);
      EXPECT_EQ(fb.c, first.back().c);
    }
  }
  a.reset();
  for (int t = 0; t < 30; ++t) {
    const auto f = uniform_f(cfg.input_size(), 700 + t, 4.0);
    const auto fs = infer_frame(model, a, std::span<const float>(f));
    EXPECT_EQ(fs.w, first[t].w);
    EXPECT_EQ(fs.c, first[t].c);
  }
}

TEST(InferFrame, RejectsMismatchedStateOrFeatures) {
  GcfsModel<float> model(GcfsParameters::random(GcfsConfig::make(Variant::kBinaural), 1));
  GcfsState<float> wrong(GcfsConfig::make(Variant::kMonaural));
  std::vector<float> f(520);
  EXPECT_THROW(infer_frame(model, wrong, std::span<const float>(f)), ConfigError);
  GcfsState<float> st(model.config());
  std::vector<float> short_f(260);
  EXPECT_THROW(infer_frame(model, st, std::span<const float>(short_f)), ConfigError);
}

TEST(BuildFeatures, RealThenImagPerChannel) {
  SpectralFrame fr(4, 65);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < 65; ++k) fr(c, k) = {100.0 * c + k, -(100.0 * c + k) - 0.5};
  const std::vector<std::size_t> order{1, 3};
  std::vector<double> out(260);
  build_features<double>(fr, order, out);
  EXPECT_EQ(out[0], 100.0);
  EXPECT_EQ(out[64], 164.0);
  EXPECT_EQ(out[65], -100.5);
  EXPECT_EQ(out[130], 300.0);
  EXPECT_EQ(out[195 + 2], -302.5);
  std::vector<double> bad(100);
  EXPECT_THROW(build_features<double>(fr, order, bad), ConfigError);
}

TEST(ApplyFilters, Examples) {
  SpectralFrame fr(4, 65);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < 65; ++k) fr(c, k) = {std::sin(0.1 * k + c), std::cos(0.3 * k - c)};
  const std::vector<std::size_t> local{0, 2};
  std::vector<Complex> out(65);

  FilterSet e1(2, 65);
  for (std::size_t k = 0; k < 65; ++k) {
    e1.W(0, k) = 1.0;
    e1.c[k] = 1.0;
  }
  apply_filters(fr, local, e1, out);
  for (std::size_t k = 0; k < 65; ++k) EXPECT_EQ(out[k], fr(0, k));

  FilterSet zero(2, 65);
  for (auto& c : zero.c) c = {3.0, -1.0};
  apply_filters(fr, local, zero, out);
  for (const auto& v : out) EXPECT_EQ(v, Complex(0.0, 0.0));

  SpectralFrame coh(4, 65);
  for (std::size_t k = 0; k < 65; ++k) coh(0, k) = coh(2, k) = std::polar(1.0, 0.05 * k);
  FilterSet avg(2, 65);
  for (std::size_t k = 0; k < 65; ++k) {
    avg.W(0, k) = avg.W(1, k) = 0.5;
    avg.c[k] = 2.0;
  }
  apply_filters(coh, local, avg, out);
  for (std::size_t k = 0; k < 65; ++k) EXPECT_NEAR(std::abs(out[k] - 2.0 * coh(0, k)), 0.0, 1e-15);

  const std::vector<std::size_t> three{0, 1, 2};
  EXPECT_THROW(apply_filters(fr, three, avg, out), ConfigError);
}

TEST(GcfsProcessor, ChannelOrdersPerEar) {
  GcfsProcessor p(random_model(Variant::kBinaural, 3));
  const auto l = p.feature_channels(0), r = p.feature_channels(1);
  EXPECT_EQ(std::vector<std::size_t>(l.begin(), l.end()),
            (std::vector<std::size_t>{kFrontLeft, kFrontRight, kBackLeft, kBackRight}));
  EXPECT_EQ(std::vector<std::size_t>(r.begin(), r.end()),
            (std::vector<std::size_t>{kFrontRight, kFrontLeft, kBackRight, kBackLeft}));
  EXPECT_EQ(p.latency(), 64u);
  EXPECT_EQ(p.name(), "gcfs-b");
  EXPECT_EQ(GcfsProcessor(random_model(Variant::kMonaural, 3)).name(), "gcfs-m");
}

TEST(GcfsProcessor, RejectsMixedModels) {
  EXPECT_THROW(GcfsProcessor(random_model(Variant::kBinaural, 1), random_model(Variant::kMonaural, 1)),
               ConfigError);
}

MultichannelAudio mirror(const MultichannelAudio& x) {
  MultichannelAudio m(4, x.frames());
  m.vec(kFrontLeft) = x.vec(kFrontRight);
  m.vec(kFrontRight) = x.vec(kFrontLeft);
  m.vec(kBackLeft) = x.vec(kBackRight);
  m.vec(kBackRight) = x.vec(kBackLeft);
  return m;
}

TEST(GcfsProcessor, MirroredInputSwapsEars) {
  for (Variant v : {Variant::kMonaural, Variant::kBinaural}) {
    const auto x = testing::random_audio(4, 32 * 100, 81, 0.2);
    GcfsProcessor a(random_model(v, 82)), b(random_model(v, 82));
    const auto y = process_stream(a, x), ym = process_stream(b, mirror(x));
    for (std::size_t n = 0; n < x.frames(); ++n) {
      ASSERT_NEAR(y(0, n), ym(1, n), 1e-6);
      ASSERT_NEAR(y(1, n), ym(0, n), 1e-6);
    }
  }
}

TEST(GcfsProcessor, SharedWeightsGiveIdenticalFilters) {
  const auto x = testing::random_audio(4, 32 * 20, 85, 0.2);
  GcfsProcessor a(random_model(Variant::kBinaural, 86));
  GcfsProcessor b(random_model(Variant::kBinaural, 86));
  process_stream(a, x);
  process_stream(b, mirror(x));
  EXPECT_EQ(a.last_filters(0).w, b.last_filters(1).w);
  EXPECT_EQ(a.last_filters(0).c, b.last_filters(1).c);
}

double ear_difference(Variant v, std::size_t ear, std::size_t perturbed_channel) {
  const auto x = testing::random_audio(4, 32 * 80, 91, 0.2);
  auto xp = x;
  const auto noise = testing::random_audio(1, x.frames(), 92, 0.2);
  for (std::size_t n = 0; n < x.frames(); ++n) xp(perturbed_channel, n) += noise(0, n);
  GcfsProcessor a(random_model(v, 93)), b(random_model(v, 93));
  const auto y = process_stream(a, x), yp = process_stream(b, xp);
  double d = 0.0;
  for (std::size_t n = 0; n < x.frames(); ++n) d = std::max(d, std::abs(y(ear, n) - yp(ear, n)));
  return d;
}

TEST(GcfsProcessor, MonauralIgnoresContralateralChannels) {
  EXPECT_EQ(ear_difference(Variant::kMonaural, 0, kFrontRight), 0.0);
  EXPECT_EQ(ear_difference(Variant::kMonaural, 0, kBackRight), 0.0);
  EXPECT_EQ(ear_difference(Variant::kMonaural, 1, kFrontLeft), 0.0);
  EXPECT_GT(ear_difference(Variant::kMonaural, 1, kFrontRight), 0.0);
}

TEST(GcfsProcessor, BinauralUsesContralateralChannels) {
  EXPECT_GT(ear_difference(Variant::kBinaural, 0, kFrontRight), 1e-6);
  EXPECT_GT(ear_difference(Variant::kBinaural, 0, kBackRight), 1e-6);
  EXPECT_GT(ear_difference(Variant::kBinaural, 1, kBackLeft), 1e-6);
}

TEST(GcfsProcessor, ZeroWeightsAreSilent) {
  auto model = std::make_shared<const GcfsModel<float>>(GcfsParameters::zeros(GcfsConfig::make(Variant::kBinaural)));
  GcfsProcessor p(model);
  const auto y = process_stream(p, testing::random_audio(4, 32 * 30, 95));
  for (std::size_t e = 0; e < 2; ++e)
    for (double v : y.vec(e)) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace gcfs
