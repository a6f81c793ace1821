#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "rdest/errors.hpp"

namespace rdest {

// N x C x H x W, row-major with W fastest.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  constexpr std::size_t size() const noexcept { return n * c * h * w; }
  constexpr std::size_t plane() const noexcept { return h * w; }
  constexpr std::size_t sample() const noexcept { return c * h * w; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

// Cache-line aligned so vectorised kernels see the same alignment on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;
  // Empty until a backward pass touches the tensor.
  Buffer<T> grad;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, Buffer<T> values) : shape(s), data(std::move(values)) {
    check_length();
  }
  Tensor(Shape s, const std::vector<T>& values) : shape(s), data(values.begin(), values.end()) {
    check_length();
  }

  Tensor(Shape s, std::initializer_list<T> values) : shape(s), data(values) { check_length(); }

  void check_length() const {
    if (data.size() != shape.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
  }

  std::size_t size() const noexcept { return data.size(); }
  bool has_grad() const noexcept { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((n * shape.c + c) * shape.h + y) * shape.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data[index(n, c, y, x)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data[index(n, c, y, x)];
  }

  std::span<T> sample(std::size_t n) noexcept {
    return std::span<T>(data).subspan(n * shape.sample(), shape.sample());
  }
  std::span<const T> sample(std::size_t n) const noexcept {
    return std::span<const T>(data).subspan(n * shape.sample(), shape.sample());
  }

  bool all_finite() const noexcept {
    for (const T v : data)
      if (!std::isfinite(v)) return false;
    for (const T v : grad)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.shape);
  for (std::size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  return out;
}

// Copies sample n of a batched tensor into a 1 x C x H x W tensor.
template <typename T>
Tensor<T> slice_sample(const Tensor<T>& batch, std::size_t n) {
  Tensor<T> out(Shape{1, batch.shape.c, batch.shape.h, batch.shape.w});
  const auto src = batch.sample(n);
  std::copy(src.begin(), src.end(), out.data.begin());
  return out;
}

}  // namespace rdest
