#pragma once

// Reverse-mode differentiation for the handful of layers the estimators use.
//
// Every op takes a Tape. When the tape is recording and at least one input
// requires a gradient, the op pushes a closure that propagates the output
// gradient back to its inputs; Tape::backward replays those closures in
// reverse order. Gradients accumulate (+=), so a tensor consumed twice (the
// skip connections) receives the sum of both contributions.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rdest/errors.hpp"
#include "rdest/tensor.hpp"

namespace rdest {

template <typename T>
using Var = std::shared_ptr<Tensor<T>>;

template <typename T>
Var<T> make_var(Tensor<T> t, bool requires_grad = false) {
  auto v = std::make_shared<Tensor<T>>(std::move(t));
  v->requires_grad = requires_grad;
  v->grad.clear();
  return v;
}

template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return steps_.size(); }

  void push(std::function<void()> step) {
    if (recording_) steps_.push_back(std::move(step));
  }

  // Seeds d(root)/d(root) = seed and runs the recorded steps backwards. The
  // tape is cleared afterwards; intermediate tensors are released with it.
  void backward(const Var<T>& root, T seed = T(1)) {
    if (root->size() != 1) throw DimensionError("backward expects a scalar root, got " + root->shape.str());
    root->ensure_grad();
    root->grad[0] += seed;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
  }

  void clear() { steps_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> steps_;
};

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;
template <typename T>
using CMapVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
bool needs_graph(const Tape<T>& tape, std::initializer_list<const Var<T>*> inputs) {
  if (!tape.recording()) return false;
  for (const auto* v : inputs)
    if ((*v)->requires_grad) return true;
  return false;
}

template <typename T>
Var<T> output_like(Shape s, bool requires_grad) {
  return make_var(Tensor<T>(s), requires_grad);
}

// Unrolls one C x H x W sample into (C*kh*kw) x (H*W) columns with zero
// same-padding and stride 1.
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, T* cols) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = img + c * height * width;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        T* dst = cols + ((c * kh + ky) * kw + kx) * height * width;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* row = dst + y * W;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H || x0 >= x1) {
            std::fill(row, row + W, T(0));
            continue;
          }
          std::fill(row, row + x0, T(0));
          std::memcpy(row + x0, plane + sy * W + x0 + dx, static_cast<std::size_t>(x1 - x0) * sizeof(T));
          std::fill(row + x1, row + W, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the sample.
template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t height, std::size_t width,
                std::size_t kh, std::size_t kw, T* img) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = img + c * height * width;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const T* src = cols + ((c * kh + ky) * kw + kx) * height * width;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* row = src + y * W;
          T* out = plane + sy * W + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] += row[x];
        }
      }
    }
  }
}

// Visits every (kernel tap, output row) pair of a same-padded convolution as
// contiguous row segments: fn(tap, dst_row_offset, src_row_offset, length).
// Used by the direct path for convolutions with very few output channels,
// where unrolling the input into columns costs more than the arithmetic.
template <typename Fn>
void for_each_tap_row(std::size_t height, std::size_t width, std::size_t kh, std::size_t kw, Fn&& fn) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t ky = 0; ky < kh; ++ky) {
    for (std::size_t kx = 0; kx < kw; ++kx) {
      const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
      const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
      const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
      const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
      if (x0 >= x1) continue;
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        const std::ptrdiff_t sy = y + dy;
        if (sy < 0 || sy >= H) continue;
        fn(ky * kw + kx, static_cast<std::size_t>(y * W + x0), static_cast<std::size_t>(sy * W + x0 + dx),
           static_cast<std::size_t>(x1 - x0));
      }
    }
  }
}

inline constexpr std::size_t kDirectConvMaxOutputs = 4;

// Per-thread scratch for unrolled columns. Buffers only grow, so large
// allocations are not returned to the OS between layers.
template <typename T>
T* scratch(int slot, std::size_t count) {
  thread_local Buffer<T> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < count) b.resize(count);
  return b.data();
}

}  // namespace detail

// kernel: K x C x kh x kw, bias: 1 x K x 1 x 1. Output keeps H and W.
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& kernel, const Var<T>& bias) {
  const Shape xs = x->shape;
  const Shape ks = kernel->shape;
  if (ks.c != xs.c)
    throw DimensionError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                         std::to_string(ks.c));
  if (ks.h % 2 == 0 || ks.w % 2 == 0) throw DimensionError("conv2d: kernel size must be odd, got " + ks.str());
  if (bias->size() != ks.n) throw DimensionError("conv2d: bias length does not match kernel count");

  const std::size_t K = ks.n, C = xs.c, H = xs.h, W = xs.w, HW = H * W;
  const std::size_t CKK = C * ks.h * ks.w;
  const bool graph = detail::needs_graph(tape, {&x, &kernel, &bias});
  auto out = detail::output_like<T>(Shape{xs.n, K, H, W}, graph);

  const bool direct = K <= detail::kDirectConvMaxOutputs;
  if (direct) {
    const std::size_t taps = ks.h * ks.w;
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t k = 0; k < K; ++k) {
        T* y = out->data.data() + (n * K + k) * HW;
        std::fill(y, y + HW, bias->data[k]);
        for (std::size_t c = 0; c < C; ++c) {
          const T* src = x->data.data() + (n * C + c) * HW;
          const T* wk = kernel->data.data() + (k * C + c) * taps;
          detail::for_each_tap_row(H, W, ks.h, ks.w, [&](std::size_t tap, std::size_t d, std::size_t s, std::size_t len) {
            const T wv = wk[tap];
            for (std::size_t i = 0; i < len; ++i) y[d + i] += wv * src[s + i];
          });
        }
      }
    }
  }

  detail::MapRM<T> cols(direct ? nullptr : detail::scratch<T>(0, CKK * HW), direct ? 0 : CKK, direct ? 0 : HW);
  const detail::CMapRM<T> wmat(kernel->data.data(), K, CKK);
  const detail::CMapVec<T> b(bias->data.data(), K);
  for (std::size_t n = 0; n < (direct ? 0 : xs.n); ++n) {
    detail::im2col(x->data.data() + n * xs.sample(), C, H, W, ks.h, ks.w, cols.data());
    detail::MapRM<T> y(out->data.data() + n * K * HW, K, HW);
    y.noalias() = wmat * cols;
    y.colwise() += b;
  }

  if (graph) {
    tape.push([x, kernel, bias, out, K, C, H, W, HW, CKK, direct] {
      if (!out->has_grad()) return;
      const Shape ks = kernel->shape;
      if (direct) {
        const std::size_t taps = ks.h * ks.w;
        if (kernel->requires_grad) kernel->ensure_grad();
        if (bias->requires_grad) bias->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        for (std::size_t n = 0; n < x->shape.n; ++n) {
          for (std::size_t k = 0; k < K; ++k) {
            const T* dy = out->grad.data() + (n * K + k) * HW;
            if (bias->requires_grad) {
              T acc = 0;
              for (std::size_t i = 0; i < HW; ++i) acc += dy[i];
              bias->grad[k] += acc;
            }
            for (std::size_t c = 0; c < C; ++c) {
              const T* src = x->data.data() + (n * C + c) * HW;
              const T* wk = kernel->data.data() + (k * C + c) * taps;
              T* dwk = kernel->requires_grad ? kernel->grad.data() + (k * C + c) * taps : nullptr;
              T* dx = x->requires_grad ? x->grad.data() + (n * C + c) * HW : nullptr;
              detail::for_each_tap_row(H, W, ks.h, ks.w, [&](std::size_t tap, std::size_t d, std::size_t s, std::size_t len) {
                if (dwk != nullptr) {
                  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
                  dwk[tap] += Eigen::Map<const Vec>(dy + d, static_cast<Eigen::Index>(len))
                                  .dot(Eigen::Map<const Vec>(src + s, static_cast<Eigen::Index>(len)));
                }
                if (dx != nullptr) {
                  const T wv = wk[tap];
                  for (std::size_t i = 0; i < len; ++i) dx[s + i] += wv * dy[d + i];
                }
              });
            }
          }
        }
        return;
      }
      detail::MapRM<T> cols(detail::scratch<T>(0, CKK * HW), CKK, HW);
      detail::MapRM<T> dcols(detail::scratch<T>(1, CKK * HW), CKK, HW);
      const detail::CMapRM<T> wmat(kernel->data.data(), K, CKK);
      if (kernel->requires_grad) kernel->ensure_grad();
      if (bias->requires_grad) bias->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      for (std::size_t n = 0; n < x->shape.n; ++n) {
        const detail::CMapRM<T> dy(out->grad.data() + n * K * HW, K, HW);
        if (kernel->requires_grad) {
          detail::im2col(x->data.data() + n * x->shape.sample(), C, H, W, ks.h, ks.w, cols.data());
          detail::MapRM<T> dw(kernel->grad.data(), K, CKK);
          dw.noalias() += dy * cols.transpose();
        }
        if (bias->requires_grad) {
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias->grad.data(), K);
          db += dy.rowwise().sum();
        }
        if (x->requires_grad) {
          dcols.noalias() = wmat.transpose() * dy;
          detail::col2im_add(dcols.data(), C, H, W, ks.h, ks.w, x->grad.data() + n * x->shape.sample());
        }
      }
    });
  }
  return out;
}

// 2x2 window, stride 2. Ties go to the first maximum in row-major order.
template <typename T>
Var<T> maxpool2(Tape<T>& tape, const Var<T>& x) {
  const Shape xs = x->shape;
  if (xs.h % 2 != 0 || xs.w % 2 != 0) throw DimensionError("maxpool2: odd spatial size " + xs.str());
  const bool graph = detail::needs_graph(tape, {&x});
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  auto out = detail::output_like<T>(os, graph);
  std::vector<std::uint32_t> argmax(graph ? os.size() : 0);

  std::size_t o = 0;
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    const T* plane = x->data.data() + p * xs.plane();
    for (std::size_t y = 0; y < os.h; ++y) {
      for (std::size_t xo = 0; xo < os.w; ++xo, ++o) {
        const std::size_t base = (2 * y) * xs.w + 2 * xo;
        const std::size_t cand[4] = {base, base + 1, base + xs.w, base + xs.w + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (plane[cand[k]] > plane[best]) best = cand[k];
        out->data[o] = plane[best];
        if (graph) argmax[o] = static_cast<std::uint32_t>(p * xs.plane() + best);
      }
    }
  }

  if (graph) {
    tape.push([x, out, argmax = std::move(argmax)] {
      if (!out->has_grad()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < argmax.size(); ++i) x->grad[argmax[i]] += out->grad[i];
    });
  }
  return out;
}

// Nearest-neighbour x2.
template <typename T>
Var<T> upsample2(Tape<T>& tape, const Var<T>& x) {
  const Shape xs = x->shape;
  const bool graph = detail::needs_graph(tape, {&x});
  const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
  auto out = detail::output_like<T>(os, graph);
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    const T* src = x->data.data() + p * xs.plane();
    T* dst = out->data.data() + p * os.plane();
    for (std::size_t y = 0; y < os.h; ++y)
      for (std::size_t xo = 0; xo < os.w; ++xo) dst[y * os.w + xo] = src[(y / 2) * xs.w + xo / 2];
  }
  if (graph) {
    tape.push([x, out] {
      if (!out->has_grad()) return;
      x->ensure_grad();
      const Shape xs = x->shape;
      const Shape os = out->shape;
      for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
        const T* g = out->grad.data() + p * os.plane();
        T* dst = x->grad.data() + p * xs.plane();
        for (std::size_t y = 0; y < os.h; ++y)
          for (std::size_t xo = 0; xo < os.w; ++xo) dst[(y / 2) * xs.w + xo / 2] += g[y * os.w + xo];
      }
    });
  }
  return out;
}

// slope: one value per channel (1 x C x 1 x 1).
template <typename T>
Var<T> prelu(Tape<T>& tape, const Var<T>& x, const Var<T>& slope) {
  const Shape xs = x->shape;
  if (slope->size() != xs.c)
    throw DimensionError("prelu: " + std::to_string(slope->size()) + " slopes for " + std::to_string(xs.c) +
                         " channels");
  const bool graph = detail::needs_graph(tape, {&x, &slope});
  auto out = detail::output_like<T>(xs, graph);
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T a = slope->data[c];
      const std::size_t off = (n * xs.c + c) * xs.plane();
      for (std::size_t i = 0; i < xs.plane(); ++i) {
        const T v = x->data[off + i];
        out->data[off + i] = v >= T(0) ? v : a * v;
      }
    }
  }
  if (graph) {
    tape.push([x, slope, out] {
      if (!out->has_grad()) return;
      const Shape xs = x->shape;
      if (x->requires_grad) x->ensure_grad();
      if (slope->requires_grad) slope->ensure_grad();
      for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t c = 0; c < xs.c; ++c) {
          const T a = slope->data[c];
          const std::size_t off = (n * xs.c + c) * xs.plane();
          T da = 0;
          for (std::size_t i = 0; i < xs.plane(); ++i) {
            const T v = x->data[off + i];
            const T g = out->grad[off + i];
            if (v >= T(0)) {
              if (x->requires_grad) x->grad[off + i] += g;
            } else {
              if (x->requires_grad) x->grad[off + i] += a * g;
              da += v * g;
            }
          }
          if (slope->requires_grad) slope->grad[c] += da;
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& x) {
  const bool graph = detail::needs_graph(tape, {&x});
  auto out = detail::output_like<T>(x->shape, graph);
  for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
  if (graph) {
    tape.push([x, out] {
      if (!out->has_grad()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i)
        if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

// Stacks b's channels after a's.
template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  const Shape as = a->shape, bs = b->shape;
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w)
    throw DimensionError("concat_channels: " + as.str() + " vs " + bs.str());
  const bool graph = detail::needs_graph(tape, {&a, &b});
  const Shape os{as.n, as.c + bs.c, as.h, as.w};
  auto out = detail::output_like<T>(os, graph);
  for (std::size_t n = 0; n < as.n; ++n) {
    std::copy_n(a->data.begin() + n * as.sample(), as.sample(), out->data.begin() + n * os.sample());
    std::copy_n(b->data.begin() + n * bs.sample(), bs.sample(), out->data.begin() + n * os.sample() + as.sample());
  }
  if (graph) {
    tape.push([a, b, out] {
      if (!out->has_grad()) return;
      const Shape as = a->shape, bs = b->shape, os = out->shape;
      for (std::size_t n = 0; n < as.n; ++n) {
        const T* g = out->grad.data() + n * os.sample();
        if (a->requires_grad) {
          a->ensure_grad();
          T* da = a->grad.data() + n * as.sample();
          for (std::size_t i = 0; i < as.sample(); ++i) da[i] += g[i];
        }
        if (b->requires_grad) {
          b->ensure_grad();
          T* db = b->grad.data() + n * bs.sample();
          for (std::size_t i = 0; i < bs.sample(); ++i) db[i] += g[as.sample() + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->shape != b->shape) throw DimensionError("add: " + a->shape.str() + " vs " + b->shape.str());
  const bool graph = detail::needs_graph(tape, {&a, &b});
  auto out = detail::output_like<T>(a->shape, graph);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (graph) {
    tape.push([a, b, out] {
      if (!out->has_grad()) return;
      for (const auto& v : {a, b}) {
        if (!v->requires_grad) continue;
        v->ensure_grad();
        for (std::size_t i = 0; i < v->size(); ++i) v->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

// N x C x H x W -> N x C x 1 x 1 (channel means).
template <typename T>
Var<T> global_avg_pool(Tape<T>& tape, const Var<T>& x) {
  const Shape xs = x->shape;
  const bool graph = detail::needs_graph(tape, {&x});
  auto out = detail::output_like<T>(Shape{xs.n, xs.c, 1, 1}, graph);
  const T inv = T(1) / static_cast<T>(xs.plane());
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    T acc = 0;
    const T* src = x->data.data() + p * xs.plane();
    for (std::size_t i = 0; i < xs.plane(); ++i) acc += src[i];
    out->data[p] = acc * inv;
  }
  if (graph) {
    tape.push([x, out, inv] {
      if (!out->has_grad()) return;
      x->ensure_grad();
      const std::size_t plane = x->shape.plane();
      for (std::size_t p = 0; p < out->size(); ++p) {
        const T g = out->grad[p] * inv;
        T* dst = x->grad.data() + p * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += g;
      }
    });
  }
  return out;
}

// weight: F x O x 1 x 1 (F = flattened input features), bias: 1 x O x 1 x 1.
// Output N x O x 1 x 1.
template <typename T>
Var<T> fully_connected(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const std::size_t N = x->shape.n, F = x->shape.sample();
  const std::size_t O = weight->shape.c;
  if (weight->shape.n != F || weight->shape.plane() != 1)
    throw DimensionError("fully_connected: " + std::to_string(F) + " features against weight " +
                         weight->shape.str());
  if (bias->size() != O) throw DimensionError("fully_connected: bias length does not match outputs");
  const bool graph = detail::needs_graph(tape, {&x, &weight, &bias});
  auto out = detail::output_like<T>(Shape{N, O, 1, 1}, graph);
  const detail::CMapRM<T> xm(x->data.data(), N, F);
  const detail::CMapRM<T> wm(weight->data.data(), F, O);
  detail::MapRM<T> ym(out->data.data(), N, O);
  for (std::size_t n = 0; n < N; ++n) {
    const auto r = static_cast<Eigen::Index>(n);
    ym.row(r).noalias() = xm.row(r) * wm;
  }
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias->data.data(), O);
  if (graph) {
    tape.push([x, weight, bias, out, N, F, O] {
      if (!out->has_grad()) return;
      const detail::CMapRM<T> dy(out->grad.data(), N, O);
      if (weight->requires_grad) {
        weight->ensure_grad();
        detail::MapRM<T>(weight->grad.data(), F, O).noalias() += detail::CMapRM<T>(x->data.data(), N, F).transpose() * dy;
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias->grad.data(), O) += dy.colwise().sum();
      }
      if (x->requires_grad) {
        x->ensure_grad();
        detail::MapRM<T>(x->grad.data(), N, F).noalias() += dy * detail::CMapRM<T>(weight->data.data(), F, O).transpose();
      }
    });
  }
  return out;
}

template <typename T>
Var<T> scalar_output(bool graph, double value) {
  auto out = make_var(Tensor<T>(Shape{1, 1, 1, 1}), graph);
  out->data[0] = static_cast<T>(value);
  return out;
}

// Mean of squared differences over every entry; target is a constant.
template <typename T>
Var<T> loss_mse(Tape<T>& tape, const Var<T>& pred, const Tensor<T>& target) {
  if (pred->shape != target.shape) throw DimensionError("loss_mse: " + pred->shape.str() + " vs " + target.shape.str());
  double acc = 0;
  for (std::size_t i = 0; i < pred->size(); ++i) {
    const double d = static_cast<double>(pred->data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  const double count = static_cast<double>(pred->size());
  const bool graph = detail::needs_graph(tape, {&pred});
  auto out = scalar_output<T>(graph, acc / count);
  if (graph) {
    tape.push([pred, target, out, count] {
      if (!out->has_grad()) return;
      pred->ensure_grad();
      const T scale = static_cast<T>(2.0 / count) * out->grad[0];
      for (std::size_t i = 0; i < pred->size(); ++i) pred->grad[i] += scale * (pred->data[i] - target.data[i]);
    });
  }
  return out;
}

// Mean absolute difference; the subgradient at a zero residual is 0.
template <typename T>
Var<T> loss_mae(Tape<T>& tape, const Var<T>& pred, const Tensor<T>& target) {
  if (pred->size() != target.size())
    throw DimensionError("loss_mae: length " + std::to_string(pred->size()) + " vs " + std::to_string(target.size()));
  double acc = 0;
  for (std::size_t i = 0; i < pred->size(); ++i)
    acc += std::abs(static_cast<double>(pred->data[i]) - static_cast<double>(target.data[i]));
  const double count = static_cast<double>(pred->size());
  const bool graph = detail::needs_graph(tape, {&pred});
  auto out = scalar_output<T>(graph, acc / count);
  if (graph) {
    tape.push([pred, target, out, count] {
      if (!out->has_grad()) return;
      pred->ensure_grad();
      const T scale = static_cast<T>(1.0 / count) * out->grad[0];
      for (std::size_t i = 0; i < pred->size(); ++i) {
        const T d = pred->data[i] - target.data[i];
        if (d > T(0))
          pred->grad[i] += scale;
        else if (d < T(0))
          pred->grad[i] -= scale;
      }
    });
  }
  return out;
}

// lambda * sum(theta^2) over all given tensors.
template <typename T>
Var<T> l2_penalty(Tape<T>& tape, const std::vector<Var<T>>& params, double lambda) {
  double acc = 0;
  bool any = false;
  for (const auto& p : params) {
    any = any || p->requires_grad;
    for (const T v : p->data) acc += static_cast<double>(v) * static_cast<double>(v);
  }
  const bool graph = tape.recording() && any;
  auto out = scalar_output<T>(graph, lambda * acc);
  if (graph) {
    tape.push([params, out, lambda] {
      if (!out->has_grad()) return;
      const T scale = static_cast<T>(2.0 * lambda) * out->grad[0];
      for (const auto& p : params) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += scale * p->data[i];
      }
    });
  }
  return out;
}

// sum_i weights[i] * x[i]; projects a tensor output onto a scalar.
template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& x, std::vector<T> weights) {
  if (weights.size() != x->size()) throw DimensionError("weighted_sum: weight count mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < x->size(); ++i) acc += static_cast<double>(weights[i]) * static_cast<double>(x->data[i]);
  const bool graph = detail::needs_graph(tape, {&x});
  auto out = scalar_output<T>(graph, acc);
  if (graph) {
    tape.push([x, out, weights = std::move(weights)] {
      if (!out->has_grad()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += weights[i] * out->grad[0];
    });
  }
  return out;
}

}  // namespace rdest
