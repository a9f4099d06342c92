// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "cinn/numerics/tensor.hpp"

namespace cinn {

// All randomness flows through this engine. Distributions are constructed per
// call so the engine state alone determines every future draw; that is what
// makes checkpointed RNG state sufficient for bit-identical resumption.
using Rng = std::mt19937_64;

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  std::normal_distribution<double> dist(mean, stddev);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
Tensor<T> normal_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
  Tensor<T> t(std::move(shape));
  fill_normal(t, rng, 0.0, stddev);
  return t;
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw DataError("malformed RNG state");
}

// Derives an independent engine for a sub-task from a base seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace cinn
