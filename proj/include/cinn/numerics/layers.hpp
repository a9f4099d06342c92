// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cinn/numerics/random.hpp"
#include "cinn/numerics/tape.hpp"
#include "json.hpp"

namespace cinn {

enum class LayerKind { kLinear, kConv, kLeakyRelu, kBatchNorm, kFlatten };

struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::size_t in = 0;   // features or channels
  std::size_t out = 0;  // features or channels (batch norm: unused)
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  double slope = 0.01;
  double eps = 1e-5;
  double momentum = 0.1;

  static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::kLinear, in, out}; }
  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel = 3, std::size_t stride = 1) {
    return {LayerKind::kConv, in, out, kernel, stride, kernel / 2};
  }
  static LayerSpec leaky_relu(double slope = 0.01) {
    LayerSpec s;
    s.kind = LayerKind::kLeakyRelu;
    s.slope = slope;
    return s;
  }
  static LayerSpec batch_norm(std::size_t channels) {
    LayerSpec s;
    s.kind = LayerKind::kBatchNorm;
    s.in = s.out = channels;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::kFlatten;
    return s;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

// Feed-forward stack of layers. Used for coupling subnetworks, the
// conditioning network and its per-block heads.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(std::string name, std::vector<LayerSpec> specs);

  bool empty() const { return layers_.empty(); }
  const std::string& name() const { return name_; }
  std::vector<LayerSpec> specs() const;

  // training selects batch statistics (and updates running averages) for
  // batch-norm layers.
  Var<T> forward(Tape<T>& tape, Var<T> x, bool training);

  // Output shape for one sample of the given shape (no batch axis); throws
  // DimensionError when the layers do not fit together.
  Shape output_shape(const Shape& sample_shape) const;

  // Xavier-uniform weights, zero biases, unit batch-norm scale. With
  // zero_last the final linear/conv layer is all zeros.
  void initialize(Rng& rng, bool zero_last);

  std::vector<Parameter<T>*> parameters();
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();
  void set_trainable(bool trainable);

 private:
  struct Layer {
    LayerSpec spec;
    Parameter<T> weight;
    Parameter<T> bias;
    Tensor<T> running_mean;
    Tensor<T> running_var;
  };

  std::string name_;
  std::vector<Layer> layers_;
};

}  // namespace cinn
