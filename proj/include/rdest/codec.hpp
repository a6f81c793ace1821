#pragma once

// Toy intra codec used as a ground-truth oracle.
//
// Each 8x8 block goes through an orthonormal DCT-II, uniform scalar
// quantisation with step 2^((QP - 4) / 6), and is charged the signed order-0
// exp-Golomb length of every level in zigzag order. No prediction, no
// context modelling, no loop filter: it only has to give monotone, learnable
// rate-distortion behaviour over the QP ladder.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "rdest/errors.hpp"
#include "rdest/frame.hpp"

namespace rdest {

inline constexpr double kPsnrCapDb = 100.0;

inline double qstep(int qp) {
  if (qp < 0 || qp > 51) throw ArgumentError("QP out of range: " + std::to_string(qp) + " (expected 0..51)");
  return std::exp2((qp - 4) / 6.0);
}

// 10 log10(peak^2 / mse), capped at 100 dB (also for mse == 0).
inline double psnr_from_mse(double mse, double peak) {
  if (mse <= 0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

using Block8 = std::array<double, 64>;

namespace detail {

inline const std::array<double, 64>& dct8_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int k = 0; k < 8; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) b[k * 8 + n] = alpha * std::cos((2 * n + 1) * k * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return basis;
}

}  // namespace detail

// Orthonormal 2-D DCT-II, row-major 8x8.
inline Block8 dct8_forward(const Block8& x) {
  const auto& c = detail::dct8_basis();
  Block8 tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int k = 0; k < 8; ++k) {
      double acc = 0;
      for (int n = 0; n < 8; ++n) acc += c[k * 8 + n] * x[y * 8 + n];
      tmp[y * 8 + k] = acc;
    }
  for (int k = 0; k < 8; ++k)
    for (int u = 0; u < 8; ++u) {
      double acc = 0;
      for (int n = 0; n < 8; ++n) acc += c[k * 8 + n] * tmp[n * 8 + u];
      out[k * 8 + u] = acc;
    }
  return out;
}

inline Block8 dct8_inverse(const Block8& coef) {
  const auto& c = detail::dct8_basis();
  Block8 tmp{}, out{};
  for (int n = 0; n < 8; ++n)
    for (int u = 0; u < 8; ++u) {
      double acc = 0;
      for (int k = 0; k < 8; ++k) acc += c[k * 8 + n] * coef[k * 8 + u];
      tmp[n * 8 + u] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int n = 0; n < 8; ++n) {
      double acc = 0;
      for (int k = 0; k < 8; ++k) acc += c[k * 8 + n] * tmp[y * 8 + k];
      out[y * 8 + n] = acc;
    }
  return out;
}

inline constexpr std::array<int, 64> kZigzag8 = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// Length in bits of the signed order-0 exp-Golomb code for v
// (0 -> 1, 1 -> 010, -1 -> 011, 2 -> 00100, ...).
inline unsigned signed_exp_golomb_length(std::int64_t v) {
  const std::uint64_t code = v > 0 ? 2 * static_cast<std::uint64_t>(v) - 1 : 2 * static_cast<std::uint64_t>(-v);
  return 2 * static_cast<unsigned>(std::bit_width(code + 1)) - 1;
}

struct EncodeResult {
  int qp = 0;
  std::uint64_t bits = 0;
  double bpp = 0;
  Frame reconstruction;
  std::vector<std::uint16_t> distortion;  // |orig - recon| per sample
  double mse = 0;
  double psnr = 0;
};

namespace detail {

// Replicate-pads to a multiple of 8 and calls fn(bx, by, block) for every block.
template <typename Fn>
void for_each_block(const Frame& frame, Fn&& fn) {
  const std::size_t pw = (frame.width + 7) / 8 * 8, ph = (frame.height + 7) / 8 * 8;
  Block8 block{};
  for (std::size_t by = 0; by < ph; by += 8)
    for (std::size_t bx = 0; bx < pw; bx += 8) {
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
          const std::size_t sx = std::min(bx + x, frame.width - 1), sy = std::min(by + y, frame.height - 1);
          block[y * 8 + x] = frame.at(sx, sy);
        }
      fn(bx, by, block);
    }
}

}  // namespace detail

inline EncodeResult encode_intra(const Frame& frame, int qp) {
  const double step = qstep(qp);
  frame.validate();
  if (frame.width == 0 || frame.height == 0) throw ArgumentError("cannot encode an empty frame");

  EncodeResult r;
  r.qp = qp;
  r.reconstruction = Frame(frame.width, frame.height, frame.bitdepth);
  const long peak = frame.max_value();
  detail::for_each_block(frame, [&](std::size_t bx, std::size_t by, const Block8& block) {
    const Block8 coef = dct8_forward(block);
    Block8 deq{};
    for (const int pos : kZigzag8) {
      const long level = std::lround(coef[pos] / step);
      r.bits += signed_exp_golomb_length(level);
      deq[pos] = static_cast<double>(level) * step;
    }
    const Block8 rec = dct8_inverse(deq);
    for (std::size_t y = 0; y < 8 && by + y < frame.height; ++y)
      for (std::size_t x = 0; x < 8 && bx + x < frame.width; ++x) {
        const long v = std::clamp(std::lround(rec[y * 8 + x]), 0L, peak);
        r.reconstruction.at(bx + x, by + y) = static_cast<std::uint16_t>(v);
      }
  });

  const std::size_t count = frame.samples.size();
  r.distortion.resize(count);
  double sq = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const int d = std::abs(static_cast<int>(frame.samples[i]) - static_cast<int>(r.reconstruction.samples[i]));
    r.distortion[i] = static_cast<std::uint16_t>(d);
    sq += static_cast<double>(d) * d;
  }
  r.mse = sq / static_cast<double>(count);
  r.psnr = psnr_from_mse(r.mse, static_cast<double>(peak));
  r.bpp = static_cast<double>(r.bits) / static_cast<double>(count);
  return r;
}

// Share of transform energy outside the DC coefficients, over all blocks.
inline double ac_energy_fraction(const Frame& frame) {
  double total = 0, ac = 0;
  detail::for_each_block(frame, [&](std::size_t, std::size_t, const Block8& block) {
    const Block8 coef = dct8_forward(block);
    for (int i = 0; i < 64; ++i) {
      total += coef[i] * coef[i];
      if (i != 0) ac += coef[i] * coef[i];
    }
  });
  return total > 0 ? ac / total : 0.0;
}

}  // namespace rdest
