// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conditioning pathway. A raw condition c goes through an optional encoder h
// once per forward pass; every coupling block k then receives h_k(h(c)) from
// its own head. Empty networks act as the identity.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cinn/numerics/layers.hpp"
#include "json.hpp"

namespace cinn::conditioning {

template <typename T>
Tensor<T> one_hot(int label, int n_classes);
// [N, n_classes] one-hot rows.
template <typename T>
Tensor<T> one_hot_batch(std::span<const int> labels, int n_classes);

struct ConditioningSpec {
  Shape input_shape;                          // per-sample raw condition shape
  std::vector<LayerSpec> encoder;             // h; empty means pass-through
  std::vector<std::vector<LayerSpec>> heads;  // h_k, one per coupling block

  friend bool operator==(const ConditioningSpec&, const ConditioningSpec&) = default;
};

void to_json(nlohmann::json& j, const ConditioningSpec& s);
void from_json(const nlohmann::json& j, ConditioningSpec& s);

// Stack with no encoder and identity heads for n_blocks blocks.
ConditioningSpec passthrough_spec(Shape input_shape, std::size_t n_blocks);

// Head made of `strided` stride-2 3x3 convolutions (each followed by a leaky
// relu) and a closing batch-norm layer. strided == 0 gives a normalization-only
// head.
std::vector<LayerSpec> strided_head(std::size_t channels, std::size_t strided, double slope = 0.01);

enum class EncoderMode { kFrozen, kJoint };

template <typename T>
class ConditioningStack {
 public:
  ConditioningStack() = default;
  // output_specs holds the per-sample feature shape each coupling block
  // expects; an empty shape marks an unconditional block, which receives no
  // feature.
  ConditioningStack(ConditioningSpec spec, std::vector<Shape> output_specs);

  const ConditioningSpec& spec() const { return spec_; }
  const std::vector<Shape>& output_specs() const { return output_specs_; }
  std::size_t num_heads() const { return heads_.size(); }

  void initialize(Rng& rng);

  // One feature per coupling block; invalid Vars for unconditional blocks.
  // training selects batch statistics in normalization layers.
  std::vector<Var<T>> features(Tape<T>& tape, Var<T> c, bool training);

  // Gradient-free features in inference mode, cached under `key` until the
  // next invalidate(). Returned tensors are rank-0 for unconditional blocks.
  const std::vector<Tensor<T>>& cached_features(const Tensor<T>& c, std::uint64_t key);
  void invalidate() { cache_.reset(); }

  // Number of encoder evaluations so far (pass-through stacks count too).
  std::size_t encoder_calls() const { return encoder_calls_; }

  void set_mode(EncoderMode mode);
  EncoderMode mode() const { return mode_; }

  std::vector<Parameter<T>*> parameters();
  std::vector<Parameter<T>*> encoder_parameters() { return encoder_.parameters(); }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();
  Sequential<T>& encoder() { return encoder_; }
  Sequential<T>& head(std::size_t k) { return heads_.at(k); }

 private:
  struct Cache {
    std::uint64_t key;
    std::vector<Tensor<T>> features;
  };

  ConditioningSpec spec_;
  std::vector<Shape> output_specs_;
  Sequential<T> encoder_;
  std::vector<Sequential<T>> heads_;
  EncoderMode mode_ = EncoderMode::kJoint;
  std::size_t encoder_calls_ = 0;
  std::optional<Cache> cache_;
};

}  // namespace cinn::conditioning
