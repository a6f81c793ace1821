#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"

using namespace rdest;
using rdest::testing::natural_patches;
using rdest::testing::random_frame;

namespace {

// Deterministic pattern used for the frozen reference values below.
Frame pattern_frame() {
  Frame f(12, 10);
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 12; ++x) f.at(x, y) = static_cast<std::uint16_t>((x * 37 + y * 11 + ((x * y) % 7) * 13) % 256);
  return f;
}

// Direct evaluation of the orthonormal 2-D DCT-II sum.
Block8 direct_dct(const Block8& x) {
  Block8 out{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          acc += x[i * 8 + j] * std::cos((2 * i + 1) * u * std::numbers::pi / 16) * std::cos((2 * j + 1) * v * std::numbers::pi / 16);
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
      out[u * 8 + v] = cu * cv * acc;
    }
  return out;
}

Block8 random_block(std::uint64_t seed) {
  Rng rng(seed);
  Block8 b{};
  for (auto& v : b) v = rng.uniform(0, 255);
  return b;
}

}  // namespace

TEST(Qstep, Values) {
  EXPECT_EQ(qstep(4), 1.0);
  EXPECT_EQ(qstep(22), 8.0);
  EXPECT_NEAR(qstep(51), 228.07007184392683, 1e-9);
  for (int qp = 1; qp <= 51; ++qp) EXPECT_GT(qstep(qp), qstep(qp - 1));
  EXPECT_THROW(qstep(52), ArgumentError);
  EXPECT_THROW(qstep(-1), ArgumentError);
}

TEST(Dct, ConstantBlockHasOnlyDc) {
  Block8 b;
  b.fill(128.0);
  const auto c = dct8_forward(b);
  EXPECT_NEAR(c[0], 1024.0, 1e-9);
  for (int i = 1; i < 64; ++i) EXPECT_NEAR(c[i], 0.0, 1e-9);
}

TEST(Dct, MatchesDirectSumRoundTripsAndPreservesEnergy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_block(seed);
    const auto c = dct8_forward(x);
    const auto ref = direct_dct(x);
    double ex = 0, ec = 0;
    for (int i = 0; i < 64; ++i) {
      EXPECT_NEAR(c[i], ref[i], 1e-9);
      ex += x[i] * x[i];
      ec += c[i] * c[i];
    }
    EXPECT_NEAR(ex, ec, 1e-6);
    const auto back = dct8_inverse(c);
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(back[i], x[i], 1e-6);
  }
}

TEST(Zigzag, IsPermutationStartingAtDc) {
  std::array<int, 64> seen{};
  for (int p : kZigzag8) ++seen[p];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(kZigzag8[0], 0);
  EXPECT_EQ(kZigzag8[1], 1);
  EXPECT_EQ(kZigzag8[2], 8);
  EXPECT_EQ(kZigzag8[63], 63);
}

TEST(ExpGolomb, LengthsMatchExplicitCodewords) {
  // Codewords built explicitly: 0 -> 1, 1 -> 010, -1 -> 011, 2 -> 00100,
  // -2 -> 00101, 3 -> 00110, 7 -> 0001110, -8 -> 000010001.
  EXPECT_EQ(signed_exp_golomb_length(0), 1U);
  EXPECT_EQ(signed_exp_golomb_length(1), 3U);
  EXPECT_EQ(signed_exp_golomb_length(-1), 3U);
  EXPECT_EQ(signed_exp_golomb_length(2), 5U);
  EXPECT_EQ(signed_exp_golomb_length(-2), 5U);
  EXPECT_EQ(signed_exp_golomb_length(3), 5U);
  EXPECT_EQ(signed_exp_golomb_length(7), 7U);
  EXPECT_EQ(signed_exp_golomb_length(-8), 9U);
}

TEST(EncodeIntra, FrozenReferenceOnPaddedPattern) {
  // Reference values from an independent scipy implementation.
  const auto f = pattern_frame();
  const auto r22 = encode_intra(f, 22);
  EXPECT_EQ(r22.bits, 1516U);
  EXPECT_NEAR(r22.mse, 4.708333333333333, 1e-12);
  EXPECT_NEAR(r22.psnr, 41.40213159096096, 1e-9);
  const auto r37 = encode_intra(f, 37);
  EXPECT_EQ(r37.bits, 700U);
  EXPECT_NEAR(r37.mse, 164.60833333333332, 1e-12);
  EXPECT_NEAR(r37.psnr, 25.966285431807748, 1e-9);
  std::uint64_t sum = 0;
  for (auto d : r37.distortion) sum += d;
  EXPECT_EQ(sum, 1223U);
}

TEST(EncodeIntra, ResultInvariantsHold) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = random_frame(13 + seed, 9 + 2 * seed, seed);
    for (int qp : {0, 22, 37, 51}) {
      const auto r = encode_intra(f, qp);
      ASSERT_EQ(r.distortion.size(), f.samples.size());
      double sq = 0;
      for (std::size_t i = 0; i < f.samples.size(); ++i) {
        const int d = std::abs(static_cast<int>(f.samples[i]) - static_cast<int>(r.reconstruction.samples[i]));
        EXPECT_EQ(r.distortion[i], d);
        EXPECT_LE(r.reconstruction.samples[i], 255);
        sq += static_cast<double>(d) * d;
      }
      const double mse = sq / static_cast<double>(f.samples.size());
      EXPECT_DOUBLE_EQ(r.mse, mse);
      EXPECT_DOUBLE_EQ(r.psnr, mse == 0 ? 100.0 : std::min(100.0, 10 * std::log10(255.0 * 255.0 / mse)));
      EXPECT_DOUBLE_EQ(r.bpp, static_cast<double>(r.bits) / static_cast<double>(f.samples.size()));
    }
  }
}

TEST(EncodeIntra, Deterministic) {
  const auto f = random_frame(24, 16, 3);
  const auto a = encode_intra(f, 27), b = encode_intra(f, 27);
  EXPECT_EQ(a.bits, b.bits);
  EXPECT_EQ(a.distortion, b.distortion);
  EXPECT_EQ(a.reconstruction.samples, b.reconstruction.samples);
}

TEST(EncodeIntra, ConstantFrameKeepsPsnrAboveFortyThroughQp41) {
  // Only the DC level is non-zero. Oracle: DC = 8 * 128, level = round(DC / step),
  // reconstruction = level * step / 8, rounded.
  Frame f(16, 16, 8, 128);
  for (int qp = 0; qp <= 41; ++qp) {
    const auto r = encode_intra(f, qp);
    EXPECT_GE(r.psnr, 40.0) << "QP " << qp;
    EXPECT_EQ(r.bits, 4U * (signed_exp_golomb_length(std::lround(1024.0 / qstep(qp))) + 63U)) << "QP " << qp;
  }
  EXPECT_NEAR(encode_intra(f, 37).psnr, 42.11020369539948, 1e-9);
  // Coarser steps move the DC far enough to drop below 40 dB.
  EXPECT_NEAR(encode_intra(f, 42).psnr, 38.58837851428586, 1e-9);
  EXPECT_NEAR(encode_intra(f, 51).psnr, 25.208242895114342, 1e-9);
}

TEST(EncodeIntra, QpFourLosesOnlyRounding) {
  for (const auto& p : natural_patches(128)) EXPECT_GE(encode_intra(p, 4).psnr, 45.0);
  EXPECT_GE(encode_intra(random_frame(64, 64, 1), 4).psnr, 45.0);
}

TEST(EncodeIntra, MonotoneOverDefaultQpsOnNaturalPatches) {
  std::size_t checked = 0;
  for (const auto& p : natural_patches(128)) {
    std::vector<EncodeResult> r;
    for (int qp : kDefaultQps) r.push_back(encode_intra(p, qp));
    const bool strict = ac_energy_fraction(p) >= 0.01;
    for (std::size_t i = 1; i < r.size(); ++i) {
      EXPECT_LE(r[i].bits, r[i - 1].bits);
      EXPECT_GE(r[i].mse, r[i - 1].mse);
      if (strict) {
        EXPECT_LT(r[i].bits, r[i - 1].bits);
        EXPECT_LT(r[i].psnr, r[i - 1].psnr);
      }
    }
    checked += strict;
  }
  EXPECT_GE(checked, 50U);
}

TEST(EncodeIntra, RejectsBadInput) {
  EXPECT_THROW(encode_intra(Frame(8, 8), 52), ArgumentError);
  Frame bad(8, 8);
  bad.samples[3] = 300;
  EXPECT_THROW(encode_intra(bad, 22), ArgumentError);
  EXPECT_THROW(encode_intra(Frame(0, 0), 22), ArgumentError);
}

TEST(EncodeIntra, EveryBlockPaysAtLeastOneBitPerCoefficient) {
  const auto r = encode_intra(Frame(8, 8, 8, 0), 51);
  EXPECT_EQ(r.bits, 64U);
}

TEST(Psnr, CapAndZero) {
  EXPECT_EQ(psnr_from_mse(0.0, 255), 100.0);
  EXPECT_EQ(psnr_from_mse(255.0 * 255.0, 255), 0.0);
  EXPECT_EQ(psnr_from_mse(1e-30, 255), 100.0);
}

TEST(AcEnergy, ConstantIsZeroNoiseIsHigh) {
  EXPECT_LT(ac_energy_fraction(Frame(16, 16, 8, 77)), 1e-20);
  EXPECT_GT(ac_energy_fraction(random_frame(16, 16, 2)), 0.01);
}
