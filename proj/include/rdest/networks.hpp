#pragma once

// The two estimators.
//
// G maps (normalised luma, normalised QP map) to a per-sample distortion map
// through a two-level encoder/decoder with skip concatenations, PReLU
// activations, a bare 5x5 output convolution and a residual sum with the
// luma input.
//
// F maps normalised luma to a K-vector (bits-per-pixel or mean squared
// distortion per QP). Same encoder/decoder trunk with ReLU, two more 3x3
// convolutions, then global average pooling, FC(128)+ReLU and FC(K).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdest/autodiff.hpp"
#include "rdest/frame.hpp"
#include "rdest/parameter.hpp"
#include "rdest/rng.hpp"
#include "rdest/weights.hpp"

namespace rdest {

inline constexpr int kQpMax = 51;
inline const std::vector<int> kDefaultQps{22, 27, 32, 37};
inline constexpr std::size_t kFeatureWidth = 64;
inline constexpr std::size_t kHiddenWidth = 128;
inline constexpr float kPreluInitSlope = 0.25F;

inline void check_qp(int qp) {
  if (qp < 0 || qp > kQpMax) throw ArgumentError("QP out of range: " + std::to_string(qp) + " (expected 0..51)");
}

inline void check_qp_list(const std::vector<int>& qps) {
  if (qps.empty()) throw ArgumentError("QP list is empty");
  for (std::size_t i = 0; i < qps.size(); ++i) {
    check_qp(qps[i]);
    if (i > 0 && qps[i] <= qps[i - 1]) throw ArgumentError("QP list must be strictly increasing");
  }
}

struct NormalizedInputs {
  Tensor<float> image;   // 1 x 1 x H x W, I / 2^(n-1)
  Tensor<float> qp_map;  // 1 x 1 x H x W, constant QP / 51
};

inline Tensor<float> normalize_image(const Frame& frame) {
  frame.validate();
  Tensor<float> image(Shape{1, 1, frame.height, frame.width});
  const double scale = std::ldexp(1.0, frame.bitdepth - 1);
  for (std::size_t i = 0; i < frame.samples.size(); ++i)
    image.data[i] = static_cast<float>(static_cast<double>(frame.samples[i]) / scale);
  return image;
}

inline float normalize_qp(int qp) {
  check_qp(qp);
  return static_cast<float>(static_cast<double>(qp) / kQpMax);
}

inline Tensor<float> qp_plane(std::size_t height, std::size_t width, int qp) {
  return Tensor<float>(Shape{1, 1, height, width}, normalize_qp(qp));
}

inline NormalizedInputs normalize_inputs(const Frame& frame, int qp) {
  const float q = normalize_qp(qp);
  auto image = normalize_image(frame);
  return {std::move(image), Tensor<float>(Shape{1, 1, frame.height, frame.width}, q)};
}

inline void check_spatial(const Shape& s) {
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0)
    throw DimensionError("spatial size must be a positive multiple of 4, got " + std::to_string(s.w) + "x" +
                         std::to_string(s.h));
}

class Network {
 public:
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  virtual ~Network() = default;

  NetworkKind kind() const noexcept { return kind_; }
  const std::vector<int>& qps() const noexcept { return qps_; }
  std::vector<Parameter<float>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<float>>& parameters() const noexcept { return params_; }

  const Parameter<float>& parameter(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p;
    throw ArgumentError("no parameter named " + name);
  }

  std::vector<Var<float>> trainable_tensors() const {
    std::vector<Var<float>> out;
    for (const auto& p : params_)
      if (p.trainable) out.push_back(p.tensor);
    return out;
  }

  double l2_sum() const {
    double acc = 0;
    for (const auto& p : params_)
      if (p.trainable)
        for (const float v : p.tensor->data) acc += static_cast<double>(v) * static_cast<double>(v);
    return acc;
  }

  void fill(float value) {
    for (auto& p : params_) std::fill(p.tensor->data.begin(), p.tensor->data.end(), value);
  }

  ModelWeights to_weights(std::uint64_t seed = 0, std::uint32_t best_epoch = 0) const {
    ModelWeights w;
    w.kind = kind_;
    w.qps = qps_;
    w.seed = seed;
    w.best_epoch = best_epoch;
    for (const auto& p : params_) {
      const Shape s = p.tensor->shape;
      w.blobs.push_back({p.name,
                         {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
                         {p.tensor->data.begin(), p.tensor->data.end()}});
    }
    return w;
  }

  // Copies values from w. Kind, QP count and every shape must match exactly.
  void load(const ModelWeights& w) {
    if (w.kind != kind_)
      throw LoadError(LoadErrorKind::KindMismatch,
                      "weights are for network " + to_string(w.kind) + ", expected " + to_string(kind_));
    if (w.qps.size() != qps_.size())
      throw LoadError(LoadErrorKind::ShapeMismatch, "weights carry " + std::to_string(w.qps.size()) +
                                                        " QPs, network has " + std::to_string(qps_.size()));
    if (w.blobs.size() != params_.size())
      throw LoadError(LoadErrorKind::ShapeMismatch, "weights carry " + std::to_string(w.blobs.size()) +
                                                        " parameters, network has " + std::to_string(params_.size()));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto* blob = w.find(params_[i].name);
      if (blob == nullptr) throw LoadError(LoadErrorKind::ShapeMismatch, "missing parameter " + params_[i].name);
      const Shape s = params_[i].tensor->shape;
      const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
      if (blob->dims != dims || blob->values.size() != s.size())
        throw LoadError(LoadErrorKind::ShapeMismatch, "shape mismatch for " + params_[i].name);
    }
    for (auto& p : params_) {
      const auto& v = w.find(p.name)->values;
      p.tensor->data.assign(v.begin(), v.end());
    }
    qps_ = w.qps;
  }

 protected:
  Network(NetworkKind kind, std::vector<int> qps) : kind_(kind), qps_(std::move(qps)) {}

  Var<float> add_param(const std::string& name, Shape shape, double stddev, float fill, Rng& rng) {
    Tensor<float> t(shape, fill);
    if (stddev > 0)
      for (auto& v : t.data) v = static_cast<float>(stddev * rng.normal());
    auto var = make_var(std::move(t), true);
    params_.push_back({name, var, true});
    return var;
  }

  struct Conv {
    Var<float> kernel;
    Var<float> bias;
    Var<float> slope;  // null unless PReLU-activated
  };

  // He-normal kernel (std sqrt(2 / fan_in)), zero bias.
  Conv add_conv(const std::string& prefix, std::size_t in, std::size_t out, std::size_t k, bool with_prelu, Rng& rng) {
    Conv c;
    const double fan_in = static_cast<double>(in * k * k);
    c.kernel = add_param(prefix + "/kernel", Shape{out, in, k, k}, std::sqrt(2.0 / fan_in), 0.0F, rng);
    c.bias = add_param(prefix + "/bias", Shape{1, out, 1, 1}, 0.0, 0.0F, rng);
    if (with_prelu) c.slope = add_param(prefix + "/slope", Shape{1, out, 1, 1}, 0.0, kPreluInitSlope, rng);
    return c;
  }

  NetworkKind kind_;
  std::vector<int> qps_;
  std::vector<Parameter<float>> params_;
};

class NetworkG : public Network {
 public:
  static NetworkG build(std::uint64_t seed, std::vector<int> qps = kDefaultQps) {
    check_qp_list(qps);
    NetworkG g(std::move(qps));
    Rng rng(seed);
    const std::size_t F = kFeatureWidth;
    g.conv_[0] = g.add_conv("g/conv1", 2, F, 3, true, rng);
    for (int i = 1; i < 7; ++i) g.conv_[i] = g.add_conv("g/conv" + std::to_string(i + 1), F, F, 3, true, rng);
    g.conv_[7] = g.add_conv("g/conv8", 2 * F, F, 3, true, rng);
    g.conv_[8] = g.add_conv("g/conv9", F, F, 3, true, rng);
    g.out_ = g.add_conv("g/out", 2 * F, 1, 5, false, rng);
    return g;
  }

  static NetworkG from_weights(const ModelWeights& w) {
    auto g = build(0, w.qps);
    g.load(w);
    return g;
  }

  // Raw (unclamped) distortion map M, N x 1 x H x W.
  Var<float> forward(Tape<float>& tape, const Var<float>& image, const Var<float>& qp_map) const {
    if (image->shape.c != 1 || qp_map->shape != image->shape)
      throw DimensionError("forward_g: expected matching N x 1 x H x W inputs, got " + image->shape.str() + " and " +
                           qp_map->shape.str());
    check_spatial(image->shape);
    auto block = [&](const Var<float>& x, const Conv& c) {
      return prelu(tape, conv2d(tape, x, c.kernel, c.bias), c.slope);
    };
    auto x = concat_channels(tape, qp_map, image);
    auto c1 = block(x, conv_[0]);
    auto c2 = block(c1, conv_[1]);
    auto c3 = block(maxpool2(tape, c2), conv_[2]);
    auto c4 = block(c3, conv_[3]);
    auto c5 = block(maxpool2(tape, c4), conv_[4]);
    auto c6 = block(upsample2(tape, c5), conv_[5]);
    auto c7 = block(c6, conv_[6]);
    auto u2 = upsample2(tape, concat_channels(tape, c7, c4));
    auto c8 = block(u2, conv_[7]);
    auto c9 = block(c8, conv_[8]);
    auto residual = conv2d(tape, concat_channels(tape, c9, c2), out_.kernel, out_.bias);
    return add(tape, residual, image);
  }

  // Inference path: M clamped to the normalised absolute-difference range [0, 2].
  Tensor<float> predict(const Tensor<float>& image, const Tensor<float>& qp_map) const {
    Tape<float> tape(false);
    auto m = forward(tape, make_var(image), make_var(qp_map));
    Tensor<float> out = std::move(*m);
    for (auto& v : out.data) v = std::clamp(v, 0.0F, 2.0F);
    return out;
  }

  Tensor<float> predict(const Frame& frame, int qp) const {
    auto in = normalize_inputs(frame, qp);
    return predict(in.image, in.qp_map);
  }

 private:
  explicit NetworkG(std::vector<int> qps) : Network(NetworkKind::G, std::move(qps)) {}

  Conv conv_[9];
  Conv out_;
};

class NetworkF : public Network {
 public:
  static NetworkF build(std::uint64_t seed, std::vector<int> qps = kDefaultQps, NetworkKind kind = NetworkKind::FBits) {
    if (kind == NetworkKind::G) throw ArgumentError("NetworkF cannot be built with kind g");
    check_qp_list(qps);
    NetworkF f(kind, std::move(qps));
    Rng rng(seed);
    const std::size_t F = kFeatureWidth;
    f.conv_[0] = f.add_conv("f/conv1", 1, F, 3, false, rng);
    for (int i = 1; i < 7; ++i) f.conv_[i] = f.add_conv("f/conv" + std::to_string(i + 1), F, F, 3, false, rng);
    f.conv_[7] = f.add_conv("f/conv8", 2 * F, F, 3, false, rng);
    f.conv_[8] = f.add_conv("f/conv9", F, F, 3, false, rng);
    f.conv_[9] = f.add_conv("f/conv10", 2 * F, F, 3, false, rng);
    f.conv_[10] = f.add_conv("f/conv11", F, F, 3, false, rng);
    const std::size_t K = f.qps_.size();
    f.fc1_w_ = f.add_param("f/fc1/weight", Shape{F, kHiddenWidth, 1, 1}, std::sqrt(2.0 / F), 0.0F, rng);
    f.fc1_b_ = f.add_param("f/fc1/bias", Shape{1, kHiddenWidth, 1, 1}, 0.0, 0.0F, rng);
    f.fc2_w_ = f.add_param("f/fc2/weight", Shape{kHiddenWidth, K, 1, 1}, std::sqrt(2.0 / kHiddenWidth), 0.0F, rng);
    f.fc2_b_ = f.add_param("f/fc2/bias", Shape{1, K, 1, 1}, 0.0, 0.0F, rng);
    return f;
  }

  static NetworkF from_weights(const ModelWeights& w) {
    if (w.kind == NetworkKind::G)
      throw LoadError(LoadErrorKind::KindMismatch, "weights are for network g, expected f-bits or f-dist");
    auto f = build(0, w.qps, w.kind);
    f.load(w);
    return f;
  }

  std::size_t outputs() const noexcept { return qps_.size(); }

  // P, N x K x 1 x 1, ordered by ascending QP.
  Var<float> forward(Tape<float>& tape, const Var<float>& image) const {
    if (image->shape.c != 1) throw DimensionError("forward_f: expected N x 1 x H x W input, got " + image->shape.str());
    check_spatial(image->shape);
    auto block = [&](const Var<float>& x, const Conv& c) { return relu(tape, conv2d(tape, x, c.kernel, c.bias)); };
    auto c1 = block(image, conv_[0]);
    auto c2 = block(c1, conv_[1]);
    auto c3 = block(maxpool2(tape, c2), conv_[2]);
    auto c4 = block(c3, conv_[3]);
    auto c5 = block(maxpool2(tape, c4), conv_[4]);
    auto c6 = block(upsample2(tape, c5), conv_[5]);
    auto c7 = block(c6, conv_[6]);
    auto u2 = upsample2(tape, concat_channels(tape, c7, c4));
    auto c8 = block(u2, conv_[7]);
    auto c9 = block(c8, conv_[8]);
    auto c10 = block(concat_channels(tape, c9, c2), conv_[9]);
    auto c11 = block(c10, conv_[10]);
    auto hidden = relu(tape, fully_connected(tape, global_avg_pool(tape, c11), fc1_w_, fc1_b_));
    return fully_connected(tape, hidden, fc2_w_, fc2_b_);
  }

  std::vector<float> predict(const Tensor<float>& image) const {
    Tape<float> tape(false);
    auto p = forward(tape, make_var(image));
    return {p->data.begin(), p->data.end()};
  }

  std::vector<float> predict(const Frame& frame) const { return predict(normalize_image(frame)); }

 private:
  NetworkF(NetworkKind kind, std::vector<int> qps) : Network(kind, std::move(qps)) {}

  Conv conv_[11];
  Var<float> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

}  // namespace rdest
