// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit test binaries.

#pragma once

#include <functional>
#include <vector>

#include "cinn/numerics/gradcheck.hpp"
#include "cinn/numerics/ops.hpp"
#include "cinn/numerics/random.hpp"

namespace cinn::testing {

// Reduces an arbitrary tensor to a scalar with fixed random weights, so every
// output coordinate contributes to the checked gradient.
template <typename T>
Var<T> project(Var<T> y, const Tensor<T>& weights) {
  return ops::sum(ops::mul(y, y.tape()->constant(weights)));
}

// Compares reverse-mode gradients of a single-input function against central
// differences. Returns the max relative error.
template <typename T>
T check_input_gradient(const std::function<Var<T>(Var<T>)>& fn, const Tensor<T>& x, Rng& rng, T h = T(1e-5)) {
  Tensor<T> proj;
  {
    Tape<T> probe(false);
    Var<T> y = fn(probe.constant(x));
    proj = Tensor<T>(y.shape());
    fill_uniform(proj, rng, -1.0, 1.0);
  }
  Tape<T> tape;
  Var<T> xv = tape.leaf(x);
  Var<T> loss = project(fn(xv), proj);
  tape.backward(loss);
  Tensor<T> analytic = tape.grad(xv.id());
  auto f = [&](const Tensor<T>& p) {
    Tape<T> t(false);
    return project(fn(t.constant(p)), proj).value().item();
  };
  Tensor<T> numeric = finite_difference_gradient<T>(f, x, h);
  return max_relative_error(analytic, numeric);
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -0.5, double hi = 0.5) {
  Tensor<T> t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

}  // namespace cinn::testing
