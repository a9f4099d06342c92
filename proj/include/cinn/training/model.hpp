// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// A conditional flow together with its conditioning stack.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cinn/conditioning/conditioning.hpp"
#include "cinn/flow/graph.hpp"

namespace cinn::training {

struct ModelSpec {
  flow::GraphSpec graph;
  conditioning::ConditioningSpec conditioning;
  // Task-specific metadata (normalization, class count, ...), kept verbatim.
  nlohmann::json meta = nlohmann::json::object();

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  flow::FlowGraph<T>& graph() { return graph_; }
  conditioning::ConditioningStack<T>& conditioning() { return cond_; }
  std::size_t dim() const { return graph_.dim(); }

  // Xavier init everywhere; with zero_last every coupling starts as the identity.
  void initialize(Rng& rng, bool zero_last = true);

  typename flow::FlowGraph<T>::ForwardResult forward(Tape<T>& tape, Var<T> x, Var<T> c, bool training);
  Var<T> inverse(Tape<T>& tape, std::span<const Var<T>> parts, Var<T> c);

  // Inference-mode conveniences (running normalization statistics).
  flow::LatentCode<T> encode(const Tensor<T>& x, const Tensor<T>& c, Tensor<T>* logdet = nullptr);
  Tensor<T> decode(const flow::LatentCode<T>& z, const Tensor<T>& c);
  Tensor<T> decode_flat(const Tensor<T>& z, const Tensor<T>& c);

  std::vector<Parameter<T>*> parameters();
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();

  // FNV-1a over every parameter and buffer value, in declaration order.
  std::uint64_t checksum();

 private:
  std::vector<Tensor<T>> condition(const Tensor<T>& c);

  ModelSpec spec_;
  flow::FlowGraph<T> graph_;
  conditioning::ConditioningStack<T> cond_;
};

}  // namespace cinn::training
