// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/training/model.hpp"

#include <cstring>

namespace cinn::training {

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"graph", s.graph}, {"conditioning", s.conditioning}, {"meta", s.meta}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.graph = j.at("graph").get<flow::GraphSpec>();
  s.conditioning = j.at("conditioning").get<conditioning::ConditioningSpec>();
  s.meta = j.value("meta", nlohmann::json::object());
}

template <typename T>
Model<T>::Model(ModelSpec spec)
    : spec_(std::move(spec)), graph_(spec_.graph), cond_(spec_.conditioning, graph_.cond_shapes()) {}

template <typename T>
void Model<T>::initialize(Rng& rng, bool zero_last) {
  graph_.initialize(rng, zero_last);
  cond_.initialize(rng);
}

template <typename T>
typename flow::FlowGraph<T>::ForwardResult Model<T>::forward(Tape<T>& tape, Var<T> x, Var<T> c, bool training) {
  std::vector<Var<T>> feats = cond_.features(tape, c, training);
  return graph_.forward(tape, x, feats);
}

template <typename T>
Var<T> Model<T>::inverse(Tape<T>& tape, std::span<const Var<T>> parts, Var<T> c) {
  std::vector<Var<T>> feats = cond_.features(tape, c, false);
  return graph_.inverse(tape, parts, feats);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::condition(const Tensor<T>& c) {
  Tape<T> tape(false);
  std::vector<Tensor<T>> out;
  for (const Var<T>& v : cond_.features(tape, tape.constant(c), false)) out.push_back(v.valid() ? v.value() : Tensor<T>());
  return out;
}

template <typename T>
flow::LatentCode<T> Model<T>::encode(const Tensor<T>& x, const Tensor<T>& c, Tensor<T>* logdet) {
  return graph_.encode(x, condition(c), logdet);
}

template <typename T>
Tensor<T> Model<T>::decode(const flow::LatentCode<T>& z, const Tensor<T>& c) {
  return graph_.decode(z, condition(c));
}

template <typename T>
Tensor<T> Model<T>::decode_flat(const Tensor<T>& z, const Tensor<T>& c) {
  return decode(flow::LatentCode<T>::from_flat(z, graph_.latent_layout()), c);
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  std::vector<Parameter<T>*> out = graph_.parameters();
  for (Parameter<T>* p : cond_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Model<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out = graph_.buffers();
  for (auto& b : cond_.buffers()) out.push_back(b);
  return out;
}

template <typename T>
std::uint64_t Model<T>::checksum() {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Tensor<T>& t) {
    for (const T v : t.data()) {
      // Hash the float32 bits so float32 and float64 models with equal
      // (float32-representable) values agree.
      const float f = static_cast<float>(v);
      unsigned char bytes[sizeof f];
      std::memcpy(bytes, &f, sizeof f);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  };
  for (Parameter<T>* p : parameters()) mix(p->value);
  for (auto& b : buffers()) mix(*b.second);
  return h;
}

template class Model<float>;
template class Model<double>;

}  // namespace cinn::training
