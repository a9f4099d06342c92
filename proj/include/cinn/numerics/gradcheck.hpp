// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "cinn/numerics/tensor.hpp"

namespace cinn {

// Central-difference gradient of a scalar function, one coordinate at a time.
// Used as the independent oracle for the reverse-mode gradients.
template <typename T, typename F>
Tensor<T> finite_difference_gradient(F&& f, const Tensor<T>& p, T h) {
  if (!(h > T(0))) throw ContractError("finite_difference_gradient: step must be positive");
  Tensor<T> grad(p.shape());
  Tensor<T> probe = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const T fp = f(probe);
    probe[i] = orig - h;
    const T fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_difference_gradient: non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (fp - fm) / (T(2) * h);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
// whose true gradient is ~0 from dominating through pure rounding noise.
template <typename T>
T max_relative_error(const Tensor<T>& a, const Tensor<T>& b, T floor = T(1e-6)) {
  if (a.shape() != b.shape()) throw DimensionError("max_relative_error: shape mismatch");
  T worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace cinn
