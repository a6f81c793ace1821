#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rdest/errors.hpp"
#include "rdest/parameter.hpp"

namespace rdest {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled l2: contributes 2 * weight_decay * theta to every gradient.
  double weight_decay = 1e-4;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;

  static AdamState for_params(const std::vector<Parameter<T>>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.tensor->size(), T(0));
      s.v.emplace_back(p.tensor->size(), T(0));
    }
    return s;
  }
};

// One bias-corrected Adam update over every trainable parameter. A missing
// grad slot counts as zero. Throws TrainingError before touching anything if
// a gradient is non-finite.
template <typename T>
void adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_step: optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = *params[i].tensor;
    if (state.m[i].size() != t.size() || state.v[i].size() != t.size())
      throw DimensionError("adam_step: state shape mismatch for " + params[i].name);
    if (!params[i].trainable) continue;
    for (const T g : t.grad)
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + params[i].name);
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T decay = static_cast<T>(2.0 * cfg.weight_decay);
  const T step = static_cast<T>(cfg.learning_rate / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto& tensor = *params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has_grad = tensor.has_grad();
    for (std::size_t k = 0; k < tensor.size(); ++k) {
      const T g = (has_grad ? tensor.grad[k] : T(0)) + decay * tensor.data[k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      tensor.data[k] -= step * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace rdest
