// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cinn/numerics/tape.hpp"

namespace cinn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Tensor<T> m;
  Tensor<T> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update of p from p.grad.
template <typename T>
void adam_step(Parameter<T>& p, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.m.shape() != p.value.shape()) {
    state.m = Tensor<T>(p.value.shape());
    state.v = Tensor<T>(p.value.shape());
  }
  if (p.grad.shape() != p.value.shape()) throw DimensionError("adam_step: gradient shape mismatch for " + p.name);
  state.t += 1;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.t)));
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  T* w = p.value.ptr();
  const T* g = p.grad.ptr();
  T* m = state.m.ptr();
  T* v = state.v.ptr();
  const std::size_t n = p.value.size();
#pragma omp parallel for simd schedule(static) if (n >= (1 << 16))
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Adam over a fixed, ordered parameter list. Frozen parameters are skipped
// and keep their own step counter.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  void step(std::span<Parameter<T>* const> params) {
    if (states_.size() < params.size()) states_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i]->trainable) adam_step(*params[i], states_[i], cfg_);
  }

  std::vector<AdamState<T>>& states() { return states_; }
  const std::vector<AdamState<T>>& states() const { return states_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamState<T>> states_;
};

}  // namespace cinn
