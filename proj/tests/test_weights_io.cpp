// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <zlib.h>

#include "gcfs/gcfsnet.hpp"
#include "gcfs/weights_io.hpp"

namespace gcfs {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gcfs_test_" + name)).string();
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

TEST(Quantize, Examples) {
  const std::vector<double> v{0.0, 1.0, 0.5, -1.0, -0.5};
  const auto q = quantize(v, DType::kInt8);
  EXPECT_EQ(q.data, (std::vector<std::int16_t>{0, 127, 64, -127, -64}));
  const auto d = dequantize(q);
  EXPECT_NEAR(d[2], 0.503937, 1e-6);
  EXPECT_EQ(d[3], -1.0);
  EXPECT_EQ(d[1], 1.0);

  QuantTensor t;
  t.dtype = DType::kInt16;
  t.data = {16384, -32767};
  const auto d16 = dequantize(t);
  EXPECT_NEAR(d16[0], 0.50001526, 1e-8);
  EXPECT_EQ(d16[1], -1.0);
}

TEST(Quantize, RoundsHalfAwayFromZero) {
  const std::vector<double> v{0.5 / 127.0, -0.5 / 127.0, 1.5 / 127.0, -2.5 / 127.0};
  const auto q = quantize(v, DType::kInt8);
  EXPECT_EQ(q.data, (std::vector<std::int16_t>{1, -1, 2, -3}));
}

TEST(Quantize, ClampsAndCounts) {
  const std::vector<double> v{1.5, -3.0, 0.2, 1.0};
  std::size_t clamped = 0;
  const auto q = quantize(v, DType::kInt16, "x", {}, &clamped);
  EXPECT_EQ(clamped, 2u);
  EXPECT_EQ(q.data[0], 32767);
  EXPECT_EQ(q.data[1], -32767);
  EXPECT_EQ(q.shape, std::vector<std::size_t>{4});
  const std::vector<double> nan{std::nan("")};
  EXPECT_THROW(quantize(nan, DType::kInt8), ConfigError);
}

TEST(Quantize, GridRoundTripErrorBound) {
  const std::size_t n = 1000000;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  for (DType t : {DType::kInt8, DType::kInt16}) {
    const auto d = dequantize(quantize(grid, t));
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(d[i] - grid[i]));
    EXPECT_LE(worst, 1.0 / (2.0 * quant_limit(t)) + 1e-15);
  }
  const auto d8 = dequantize(quantize(grid, DType::kInt8));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(d8[i] - grid[i]));
  EXPECT_LE(worst, 1.0 / 254.0 + 1e-15);
}

TEST(Quantize, Idempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.2, 1.2);
  std::vector<double> v(5000);
  for (auto& x : v) x = d(rng);
  for (DType t : {DType::kInt8, DType::kInt16}) {
    const auto q = quantize(v, t);
    EXPECT_EQ(quantize(dequantize(q), t).data, q.data);
  }
}

WeightContainer random_container(Variant v, std::uint64_t seed) {
  auto p = GcfsParameters::random(GcfsConfig::make(v), seed);
  p.input_scale = 0.75;
  p.r = 2.25;
  return to_container(p);
}

TEST(Container, QuantizationClasses) {
  const auto wc = random_container(Variant::kMonaural, 1);
  const auto layout = tensor_layout(wc.config);
  ASSERT_EQ(wc.tensors.size(), layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i)
    EXPECT_EQ(wc.tensors[i].dtype, layout[i].is_bias ? DType::kInt16 : DType::kInt8) << layout[i].name;
}

TEST(Container, EncodeDecodeBitIdentical) {
  for (Variant v : {Variant::kMonaural, Variant::kBinaural}) {
    auto wc = random_container(v, 5);
    wc.metadata["note"] = "unit test";
    const auto bytes = encode_container(wc);
    EXPECT_EQ(decode_container(bytes), wc);
    EXPECT_EQ(encode_container(decode_container(bytes)), bytes);
  }
}

TEST(Container, SaveLoadRoundTrip) {
  const auto wc = random_container(Variant::kBinaural, 6);
  const auto path = temp_path("roundtrip.gcfs");
  save_container(path, wc);
  EXPECT_EQ(load_container(path), wc);
  std::filesystem::remove(path);
}

TEST(Container, ReproducibleBytes) {
  EXPECT_EQ(encode_container(random_container(Variant::kMonaural, 7)),
            encode_container(random_container(Variant::kMonaural, 7)));
}

TEST(Container, HeaderLayout) {
  const auto bytes = encode_container(random_container(Variant::kMonaural, 8));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GCFS");
  EXPECT_EQ(read_u32(bytes, 4), 1u);
  const std::uint64_t size = read_u32(bytes, 8) | (static_cast<std::uint64_t>(read_u32(bytes, 12)) << 32);
  EXPECT_EQ(size, bytes.size() - 20);
  const std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, bytes.data() + 20, static_cast<uInt>(size)));
  EXPECT_EQ(read_u32(bytes, 16), crc);
  // payload begins with the length-prefixed config text
  const std::uint32_t cfg_len = read_u32(bytes, 20);
  const std::string cfg(bytes.begin() + 24, bytes.begin() + 24 + cfg_len);
  EXPECT_EQ(cfg.rfind("variant=monaural\n", 0), 0u);
}

TEST(Container, CorruptByteFailsChecksum) {
  const auto bytes = encode_container(random_container(Variant::kMonaural, 9));
  for (std::size_t off : {std::size_t{20}, std::size_t{400}, bytes.size() - 1}) {
    auto bad = bytes;
    bad[off] ^= 0x10;
    try {
      decode_container(bad);
      FAIL() << "no error at offset " << off;
    } catch (const WeightsError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
    }
  }
}

TEST(Container, RejectsBadMagicVersionAndTruncation) {
  const auto bytes = encode_container(random_container(Variant::kMonaural, 10));
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_container(magic), WeightsError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(decode_container(version), WeightsError);
  for (std::size_t len : {std::size_t{0}, std::size_t{10}, std::size_t{19}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(len));
    EXPECT_THROW(decode_container(cut), WeightsError) << len;
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_container(extra), WeightsError);
}

TEST(Container, RejectsTensorSetMismatch) {
  auto missing = random_container(Variant::kMonaural, 11);
  missing.tensors.pop_back();
  EXPECT_THROW(encode_container(missing), WeightsError);
  auto dup = random_container(Variant::kMonaural, 11);
  dup.tensors.back() = dup.tensors.front();
  EXPECT_THROW(validate_container(dup), WeightsError);
  auto dtype = random_container(Variant::kMonaural, 11);
  dtype.tensors[0].dtype = DType::kInt16;
  EXPECT_THROW(validate_container(dtype), WeightsError);
  auto range = random_container(Variant::kMonaural, 11);
  range.tensors[0].data[0] = 128;
  EXPECT_THROW(validate_container(range), WeightsError);
  auto r = random_container(Variant::kMonaural, 11);
  r.r = 0.0f;
  EXPECT_THROW(validate_container(r), WeightsError);
}

TEST(Container, BinauralIntoMonauralEngineFails) {
  const auto path = temp_path("binaural.gcfs");
  save_container(path, random_container(Variant::kBinaural, 12));
  EXPECT_THROW(load_gcfs_model(path, Variant::kMonaural), WeightsError);
  EXPECT_NO_THROW(load_gcfs_model(path, Variant::kBinaural));
  std::filesystem::remove(path);
}

TEST(Container, MissingFileIsIoError) {
  EXPECT_THROW(load_container(temp_path("does_not_exist.gcfs")), IoError);
}

TEST(Container, DequantizedModelMatchesQuantizedValues) {
  const auto wc = random_container(Variant::kMonaural, 13);
  const auto p = from_container(wc);
  EXPECT_DOUBLE_EQ(p.input_scale, 0.75);
  EXPECT_DOUBLE_EQ(p.r, 2.25);
  for (const auto& t : wc.tensors) EXPECT_EQ(p.at(t.name), dequantize(t));
}

}  // namespace
}  // namespace gcfs
