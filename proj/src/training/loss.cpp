// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/training/loss.hpp"

#include "cinn/numerics/ops.hpp"

namespace cinn::training {

template <typename T>
Var<T> nll_loss(std::span<const Var<T>> parts, Var<T> logdet) {
  if (parts.empty()) throw DimensionError("nll_loss: empty latent code");
  const std::size_t n = logdet.dim(0);
  Var<T> sq;
  for (const Var<T>& p : parts) {
    if (p.dim(0) != n) throw DimensionError("nll_loss: latent parts and log-det disagree on the batch size");
    Var<T> s = ops::sum_per_sample(ops::square(p));
    sq = sq.valid() ? ops::add(sq, s) : s;
  }
  return ops::mean(ops::sub(ops::scale(sq, T(0.5)), logdet));
}

template <typename T>
Var<T> total_loss(Var<T> nll, std::span<Parameter<T>* const> params, T tau) {
  if (tau < T(0)) throw ConfigError("total_loss: tau must be >= 0");
  if (tau == T(0)) return nll;
  Tape<T>& tape = *nll.tape();
  Var<T> penalty;
  for (Parameter<T>* p : params) {
    if (!p->trainable) continue;
    Var<T> s = ops::sum(ops::square(tape.parameter(*p)));
    penalty = penalty.valid() ? ops::add(penalty, s) : s;
  }
  if (!penalty.valid()) return nll;
  return ops::add(nll, ops::scale(penalty, tau));
}

template <typename T>
Tensor<T> add_noise(const Tensor<T>& x, T sigma, Rng& rng) {
  if (sigma < T(0)) throw ConfigError("add_noise: sigma must be >= 0");
  if (sigma == T(0)) return x;
  Tensor<T> out = x;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<T>(sigma * normal(rng));
  return out;
}

#define CINN_INSTANTIATE(T)                                                          \
  template Var<T> nll_loss<T>(std::span<const Var<T>>, Var<T>);                      \
  template Var<T> total_loss<T>(Var<T>, std::span<Parameter<T>* const>, T);          \
  template Tensor<T> add_noise<T>(const Tensor<T>&, T, Rng&);
CINN_INSTANTIATE(float)
CINN_INSTANTIATE(double)
#undef CINN_INSTANTIATE

}  // namespace cinn::training
