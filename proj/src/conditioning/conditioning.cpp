// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/conditioning/conditioning.hpp"

namespace cinn::conditioning {

template <typename T>
Tensor<T> one_hot(int label, int n_classes) {
  if (n_classes < 1 || label < 0 || label >= n_classes) {
    throw DimensionError("one_hot: label " + std::to_string(label) + " outside [0, " + std::to_string(n_classes) + ")");
  }
  Tensor<T> out(Shape{static_cast<std::size_t>(n_classes)});
  out[static_cast<std::size_t>(label)] = T(1);
  return out;
}

template <typename T>
Tensor<T> one_hot_batch(std::span<const int> labels, int n_classes) {
  const std::size_t n = labels.size(), k = static_cast<std::size_t>(std::max(n_classes, 0));
  Tensor<T> out(Shape{n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor<T> row = one_hot<T>(labels[i], n_classes);
    std::copy(row.data().begin(), row.data().end(), out.ptr() + i * k);
  }
  return out;
}

void to_json(nlohmann::json& j, const ConditioningSpec& s) {
  j = nlohmann::json{{"input_shape", s.input_shape}, {"encoder", s.encoder}, {"heads", s.heads}};
}

void from_json(const nlohmann::json& j, ConditioningSpec& s) {
  s.input_shape = j.at("input_shape").get<Shape>();
  s.encoder = j.at("encoder").get<std::vector<LayerSpec>>();
  s.heads = j.at("heads").get<std::vector<std::vector<LayerSpec>>>();
}

ConditioningSpec passthrough_spec(Shape input_shape, std::size_t n_blocks) {
  ConditioningSpec s;
  s.input_shape = std::move(input_shape);
  s.heads.resize(n_blocks);
  return s;
}

std::vector<LayerSpec> strided_head(std::size_t channels, std::size_t strided, double slope) {
  if (strided > 5) throw ConfigError("conditioning heads use at most five strided convolutions");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < strided; ++i) {
    layers.push_back(LayerSpec::conv(channels, channels, 3, 2));
    layers.push_back(LayerSpec::leaky_relu(slope));
  }
  layers.push_back(LayerSpec::batch_norm(channels));
  return layers;
}

template <typename T>
ConditioningStack<T>::ConditioningStack(ConditioningSpec spec, std::vector<Shape> output_specs)
    : spec_(std::move(spec)), output_specs_(std::move(output_specs)), encoder_("cond.h", spec_.encoder) {
  if (spec_.heads.size() != output_specs_.size()) {
    throw DimensionError("conditioning: " + std::to_string(spec_.heads.size()) + " heads for " +
                         std::to_string(output_specs_.size()) + " coupling blocks");
  }
  const Shape encoded = encoder_.output_shape(spec_.input_shape);
  heads_.reserve(spec_.heads.size());
  for (std::size_t k = 0; k < spec_.heads.size(); ++k) {
    heads_.emplace_back("cond.head" + std::to_string(k), spec_.heads[k]);
    if (output_specs_[k].empty()) continue;
    const Shape out = heads_.back().output_shape(encoded);
    if (out != output_specs_[k]) {
      throw DimensionError("conditioning head " + std::to_string(k) + " produces " + shape_str(out) + ", block expects " +
                           shape_str(output_specs_[k]));
    }
  }
}

template <typename T>
void ConditioningStack<T>::initialize(Rng& rng) {
  encoder_.initialize(rng, false);
  for (Sequential<T>& h : heads_) h.initialize(rng, false);
  invalidate();
}

template <typename T>
std::vector<Var<T>> ConditioningStack<T>::features(Tape<T>& tape, Var<T> c, bool training) {
  if (!c.valid()) {
    for (const Shape& s : output_specs_)
      if (!s.empty()) throw DimensionError("conditioning: a conditional block received no condition");
    return std::vector<Var<T>>(heads_.size());
  }
  const Shape& cs = c.shape();
  if (cs.size() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), cs.begin() + 1)) {
    throw DimensionError("conditioning: condition " + shape_str(cs) + " does not match " +
                         shape_str(spec_.input_shape));
  }
  ++encoder_calls_;
  Var<T> encoded = encoder_.forward(tape, c, training);
  std::vector<Var<T>> out(heads_.size());
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    if (output_specs_[k].empty()) continue;
    out[k] = heads_[k].forward(tape, encoded, training);
  }
  return out;
}

template <typename T>
const std::vector<Tensor<T>>& ConditioningStack<T>::cached_features(const Tensor<T>& c, std::uint64_t key) {
  if (cache_ && cache_->key == key) return cache_->features;
  Tape<T> tape(false);
  std::vector<Var<T>> vars = features(tape, tape.constant(c), false);
  Cache fresh{key, {}};
  for (const Var<T>& v : vars) fresh.features.push_back(v.valid() ? v.value() : Tensor<T>());
  cache_ = std::move(fresh);
  return cache_->features;
}

template <typename T>
void ConditioningStack<T>::set_mode(EncoderMode mode) {
  mode_ = mode;
  encoder_.set_trainable(mode == EncoderMode::kJoint);
}

template <typename T>
std::vector<Parameter<T>*> ConditioningStack<T>::parameters() {
  std::vector<Parameter<T>*> out = encoder_.parameters();
  for (Sequential<T>& h : heads_)
    for (Parameter<T>* p : h.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ConditioningStack<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out = encoder_.buffers();
  for (Sequential<T>& h : heads_)
    for (auto& b : h.buffers()) out.push_back(b);
  return out;
}

template Tensor<float> one_hot<float>(int, int);
template Tensor<double> one_hot<double>(int, int);
template Tensor<float> one_hot_batch<float>(std::span<const int>, int);
template Tensor<double> one_hot_batch<double>(std::span<const int>, int);
template class ConditioningStack<float>;
template class ConditioningStack<double>;

}  // namespace cinn::conditioning
