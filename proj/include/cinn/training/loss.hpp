// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Maximum-likelihood objective: batch mean of ||z||^2 / 2 - log|det J|, plus
// tau * ||theta||^2 over trainable parameters.

#pragma once

#include <span>

#include "cinn/numerics/random.hpp"
#include "cinn/numerics/tape.hpp"

namespace cinn::training {

template <typename T>
Var<T> nll_loss(std::span<const Var<T>> parts, Var<T> logdet);

// Frozen parameters (trainable == false) are excluded from the penalty.
template <typename T>
Var<T> total_loss(Var<T> nll, std::span<Parameter<T>* const> params, T tau);

template <typename T>
Tensor<T> add_noise(const Tensor<T>& x, T sigma, Rng& rng);

}  // namespace cinn::training
