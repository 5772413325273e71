#pragma once

#include <cstdint>
#include <string_view>

#include "rankscl/tensor.hpp"

namespace rankscl {

struct AdamHyper {
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::uint64_t step_count = 0;
  Tensor<T> m;
  Tensor<T> v;
  AdamHyper hyper;

  static AdamState zeros_like(const Tensor<T>& param, const AdamHyper& hyper = {});
};

template <typename T>
struct AdamResult {
  Tensor<T> param;
  AdamState<T> state;
};

// One bias-corrected Adam update with decoupled weight decay
// (param <- param - lr * wd * param, applied before the moment update).
// `name` only labels the NumericError thrown for a non-finite gradient.
template <typename T>
AdamResult<T> adam_step(const Tensor<T>& param, const Tensor<T>& grad, const AdamState<T>& state,
                        std::string_view name = "param");

}  // namespace rankscl
