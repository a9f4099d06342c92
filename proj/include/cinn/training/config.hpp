// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "cinn/training/model.hpp"

namespace cinn::training {

// Each switch turns one stabilization trick off when false.
struct Ablations {
  bool noise = true;    // input noise augmentation
  bool clamp = true;    // soft clamping of scale exponents
  bool permute = true;  // fixed orthogonal mixing between couplings
  bool haar = true;     // Haar wavelet downsampling (off: plain 2x2 squeeze)
  bool init = true;     // zero last subnetwork layer (off: Xavier everywhere)

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct TrainConfig {
  double sigma_noise = 0.02;
  double tau = 1e-5;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_decay = 0.3;
  std::size_t plateau_window = 200;
  std::size_t plateau_patience = 5;
  std::size_t batch_size = 64;
  std::size_t max_steps = 1000;
  double clamp_alpha = 1.9;
  std::uint64_t seed = 0;
  std::size_t freeze_h_steps = 0;
  std::string precision = "float32";  // or "float64"
  std::size_t checkpoint_every = 0;   // 0: only at the end
  Ablations ablations;

  // Throws ConfigError on out-of-range values.
  void validate() const;
  double effective_sigma() const { return ablations.noise ? sigma_noise : 0.0; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const Ablations& a);
void from_json(const nlohmann::json& j, Ablations& a);
void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Rewrites a model spec for the clamp, permute and haar switches and the
// configured clamp alpha.
ModelSpec apply_ablations(ModelSpec spec, const TrainConfig& cfg);

}  // namespace cinn::training
