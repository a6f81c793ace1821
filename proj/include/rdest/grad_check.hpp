#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rdest/autodiff.hpp"
#include "rdest/rng.hpp"

namespace rdest {

// Step sizes for the two precisions. float needs the larger step so that
// rounding in the forward pass stays well below the tolerance; inputs must
// then sit at least this far from any kink.
template <typename T>
constexpr T default_fd_step() {
  if constexpr (sizeof(T) >= 8)
    return T(1e-3);
  else
    return T(5e-2);
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t input = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
// turning rounding noise into huge ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-2) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares reverse-mode gradients of `op` against central finite differences.
// Non-scalar outputs are projected onto a scalar with fixed random weights.
// Only inputs flagged in `differentiable` are checked.
template <typename T>
GradCheckResult grad_check(
    const std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>& op,
    const std::vector<Tensor<T>>& inputs, const std::vector<bool>& differentiable,
    T step = default_fd_step<T>(), std::uint64_t seed = 0x5eed) {
  std::vector<T> projection;
  auto project = [&](std::size_t count) {
    if (projection.empty()) {
      Rng rng(seed);
      projection.resize(count);
      for (auto& w : projection) w = static_cast<T>(rng.uniform(-1.0, 1.0));
    }
  };

  std::vector<Var<T>> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    vars.push_back(make_var(inputs[i], i < differentiable.size() && differentiable[i]));
  Tape<T> tape;
  auto out = op(tape, vars);
  if (out->size() == 1) {
    tape.backward(out);
  } else {
    project(out->size());
    tape.backward(weighted_sum(tape, out, projection));
  }

  // The numeric side projects in double so that only the op's own rounding
  // enters the difference quotient.
  auto scalar_of = [&](const std::vector<Var<T>>& probe) {
    Tape<T> inference(false);
    auto y = op(inference, probe);
    if (y->size() == 1) return static_cast<double>(y->data[0]);
    double acc = 0;
    for (std::size_t i = 0; i < y->size(); ++i) acc += static_cast<double>(projection[i]) * static_cast<double>(y->data[i]);
    return acc;
  };

  GradCheckResult worst;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (!vars[i]->requires_grad) continue;
    vars[i]->ensure_grad();
    for (std::size_t k = 0; k < vars[i]->size(); ++k) {
      auto eval = [&](T delta) {
        std::vector<Var<T>> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) probe.push_back(make_var(inputs[j]));
        probe[i]->data[k] += delta;
        return scalar_of(probe);
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * static_cast<double>(step));
      const double analytic = static_cast<double>(vars[i]->grad[k]);
      const double err = relative_error(analytic, numeric);
      if (err > worst.max_relative_error || (worst.max_relative_error == 0.0 && i == 0 && k == 0))
        worst = GradCheckResult{err, i, k, analytic, numeric};
    }
  }
  return worst;
}

}  // namespace rdest
