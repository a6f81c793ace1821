#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rdest/errors.hpp"

namespace rdest {

// Single luma plane, samples in [0, 2^bitdepth - 1].
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  int bitdepth = 8;
  std::vector<std::uint16_t> samples;

  Frame() = default;
  Frame(std::size_t w, std::size_t h, int depth = 8, std::uint16_t fill = 0)
      : width(w), height(h), bitdepth(depth), samples(w * h, fill) {}

  std::uint16_t& at(std::size_t x, std::size_t y) { return samples[y * width + x]; }
  std::uint16_t at(std::size_t x, std::size_t y) const { return samples[y * width + x]; }
  int max_value() const { return (1 << bitdepth) - 1; }

  void validate() const {
    if (bitdepth < 1 || bitdepth > 16) throw ArgumentError("bitdepth must be in [1, 16], got " + std::to_string(bitdepth));
    if (samples.size() != width * height)
      throw ArgumentError("frame has " + std::to_string(samples.size()) + " samples for " + std::to_string(width) +
                          "x" + std::to_string(height));
    const int peak = max_value();
    for (const auto s : samples)
      if (s > peak) throw ArgumentError("sample " + std::to_string(s) + " exceeds bitdepth " + std::to_string(bitdepth));
  }
};

}  // namespace rdest
