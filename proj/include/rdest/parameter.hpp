#pragma once

#include <string>
#include <vector>

#include "rdest/autodiff.hpp"

namespace rdest {

template <typename T>
struct Parameter {
  std::string name;  // e.g. "g/conv1/kernel"
  Var<T> tensor;
  bool trainable = true;
};

template <typename T>
std::size_t parameter_count(const std::vector<Parameter<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

template <typename T>
void zero_grads(std::vector<Parameter<T>>& params) {
  for (auto& p : params) p.tensor->zero_grad();
}

}  // namespace rdest
