#pragma once

// Evaluation metrics: block mean-of-squares, Pearson correlation, discrete
// Frechet distance over densified (QP, value) curves, mean/std aggregation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rdest/errors.hpp"

namespace rdest {

// Per-block mean of squared values, blocks in row-major order.
template <typename T>
std::vector<double> block_reduce(std::span<const T> map, std::size_t width, std::size_t height, std::size_t block) {
  if (map.size() != width * height) throw DimensionError("block_reduce: map size does not match W x H");
  if (block == 0 || width % block != 0 || height % block != 0)
    throw ArgumentError("block size " + std::to_string(block) + " does not divide " + std::to_string(width) + "x" +
                        std::to_string(height));
  const std::size_t bw = width / block, bh = height / block;
  std::vector<double> out(bw * bh, 0.0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double v = static_cast<double>(map[y * width + x]);
      out[(y / block) * bw + x / block] += v * v;
    }
  const double n = static_cast<double>(block * block);
  for (auto& v : out) v /= n;
  return out;
}

// Pearson correlation. nullopt when either input has zero variance.
inline std::optional<double> pearson(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("pearson: length mismatch");
  if (u.size() < 2) throw ArgumentError("pearson: need at least two samples");
  const auto constant = [](std::span<const double> s) {
    return std::all_of(s.begin(), s.end(), [&](double x) { return x == s.front(); });
  };
  if (constant(u) || constant(v)) return std::nullopt;
  const double n = static_cast<double>(u.size());
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double suv = 0, suu = 0, svv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i] - mu, b = v[i] - mv;
    suv += a * b;
    suu += a * a;
    svv += b * b;
  }
  if (!(suu > 0) || !(svv > 0)) return std::nullopt;
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

struct MeanStd {
  double mean = 0;
  double std = 0;  // population
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Discrete Frechet DP with curve A fixed and B fed one point at a time.
// After k pushes, distance() is the coupling distance between A and B[0..k).
class FrechetAccumulator {
 public:
  explicit FrechetAccumulator(std::span<const Point2> a) : a_(a.begin(), a.end()), col_(a.size()) {
    if (a_.empty()) throw ArgumentError("discrete_frechet: empty curve");
  }

  void push(const Point2& b) {
    if (!started_) {
      double run = 0;
      for (std::size_t i = 0; i < a_.size(); ++i) col_[i] = run = std::max(run, rdest::distance(a_[i], b));
      started_ = true;
      return;
    }
    double diag = col_[0];
    col_[0] = std::max(col_[0], rdest::distance(a_[0], b));
    for (std::size_t i = 1; i < a_.size(); ++i) {
      const double left = col_[i];
      col_[i] = std::max(rdest::distance(a_[i], b), std::min({left, diag, col_[i - 1]}));
      diag = left;
    }
  }

  bool empty() const noexcept { return !started_; }

  double distance() const {
    if (!started_) throw ArgumentError("discrete_frechet: empty curve");
    return col_.back();
  }

 private:
  std::vector<Point2> a_;
  std::vector<double> col_;
  bool started_ = false;
};

inline double discrete_frechet(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty() || b.empty()) throw ArgumentError("discrete_frechet: empty curve");
  FrechetAccumulator acc(a);
  for (const auto& p : b) acc.push(p);
  return acc.distance();
}

inline constexpr int kDensifySteps = 16;

// Inserts steps - 1 linearly interpolated points inside every segment.
inline std::vector<Point2> densify(std::span<const Point2> curve, int steps = kDensifySteps) {
  if (steps < 1) throw ArgumentError("densify: steps must be >= 1");
  std::vector<Point2> out;
  if (curve.empty()) return out;
  out.reserve((curve.size() - 1) * static_cast<std::size_t>(steps) + 1);
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const Point2 a = curve[i], b = curve[i + 1];
    for (int s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      out.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
    }
  }
  out.push_back(curve.back());
  return out;
}

struct QpCurve {
  std::vector<int> qps;
  std::vector<double> values;

  void validate() const {
    if (qps.size() != values.size()) throw DimensionError("QP curve: QP and value counts differ");
    for (std::size_t i = 1; i < qps.size(); ++i)
      if (qps[i] <= qps[i - 1]) throw ArgumentError("QP curve: QPs must be strictly increasing");
  }

  std::vector<Point2> points() const {
    validate();
    std::vector<Point2> out;
    for (std::size_t i = 0; i < qps.size(); ++i) out.push_back({static_cast<double>(qps[i]), values[i]});
    return out;
  }
};

// Frechet distance between two (QP, value) curves after densification.
inline double curve_frechet(const QpCurve& a, const QpCurve& b, int steps = kDensifySteps) {
  const auto pa = densify(a.points(), steps), pb = densify(b.points(), steps);
  return discrete_frechet(pa, pb);
}

inline double mean_absolute_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("MAE: length mismatch");
  if (a.empty()) throw ArgumentError("MAE: empty vectors");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace rdest
