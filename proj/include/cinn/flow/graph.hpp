// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Invertible flow graphs: a linear chain of coupling, fixed orthogonal mixing,
// Haar downsampling and split nodes. Split nodes emit part of their input as a
// latent part; the remaining channels continue through the chain. The latent
// code is the list of emitted parts followed by the final output.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cinn/flow/coupling.hpp"
#include "cinn/numerics/random.hpp"
#include "json.hpp"

namespace cinn::flow {

// Random orthogonal matrix: QR of a seeded Gaussian matrix with the signs of
// R's diagonal folded into Q so the result is uniquely determined by the seed.
template <typename T>
Tensor<T> orthogonal_init(std::size_t dim, std::uint64_t seed);

enum class NodeType { kCoupling, kMix, kHaar, kSplit };

struct NodeSpec {
  NodeType type = NodeType::kCoupling;
  CouplingSpec coupling;        // kCoupling
  std::uint64_t mix_seed = 0;   // kMix
  bool wavelet = true;          // kHaar: false replaces the wavelet with a plain 2x2 squeeze
  std::size_t emit = 0;         // kSplit: trailing channels emitted as a latent part

  static NodeSpec make_coupling(CouplingSpec c);
  static NodeSpec mix(std::uint64_t seed);
  static NodeSpec haar(bool wavelet = true);
  static NodeSpec split(std::size_t emit);

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct GraphSpec {
  Shape input_shape;  // per sample: {F} or {C, H, W}
  std::vector<NodeSpec> nodes;

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

void to_json(nlohmann::json& j, const CouplingSpec& s);
void from_json(const nlohmann::json& j, CouplingSpec& s);
void to_json(nlohmann::json& j, const NodeSpec& s);
void from_json(const nlohmann::json& j, NodeSpec& s);
void to_json(nlohmann::json& j, const GraphSpec& s);
void from_json(const nlohmann::json& j, GraphSpec& s);

// Per-sample latent parts, each with a leading batch axis.
template <typename T>
struct LatentCode {
  std::vector<Tensor<T>> parts;

  std::size_t batch() const { return parts.empty() ? 0 : parts.front().dim(0); }
  // Concatenates every part, flattened per sample, into [N, D].
  Tensor<T> flatten() const;
  // Inverse of flatten given the per-sample part shapes.
  static LatentCode from_flat(const Tensor<T>& flat, const std::vector<Shape>& layout);
};

template <typename T>
class FlowGraph {
 public:
  struct ForwardResult {
    std::vector<Var<T>> parts;
    Var<T> logdet;  // [N]
  };

  // Validates every node against the running shape; throws DimensionError on
  // mismatches and on coupling blocks with input dimension below 2.
  explicit FlowGraph(GraphSpec spec);

  const GraphSpec& spec() const { return spec_; }
  std::size_t dim() const { return shape_size(spec_.input_shape); }
  const Shape& input_shape() const { return spec_.input_shape; }
  // Per-sample shapes of the latent parts, in code order.
  const std::vector<Shape>& latent_layout() const { return layout_; }
  std::size_t num_couplings() const { return couplings_.size(); }
  // Per-sample condition shapes of the coupling blocks in order (empty for
  // unconditional blocks).
  std::vector<Shape> cond_shapes() const;

  void initialize(Rng& rng, bool zero_last = true);
  std::vector<Parameter<T>*> parameters();
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();

  // cond holds one entry per coupling block; pass an empty span for a fully
  // unconditional graph.
  ForwardResult forward(Tape<T>& tape, Var<T> x, std::span<const Var<T>> cond);
  Var<T> inverse(Tape<T>& tape, std::span<const Var<T>> parts, std::span<const Var<T>> cond);

  // Gradient-free conveniences. A rank-0 condition tensor stands for "no
  // condition" at an unconditional block.
  LatentCode<T> encode(const Tensor<T>& x, const std::vector<Tensor<T>>& cond, Tensor<T>* logdet = nullptr);
  Tensor<T> decode(const LatentCode<T>& z, const std::vector<Tensor<T>>& cond);

  // Mixing matrices, keyed by node index; fixed after construction.
  const Tensor<T>& mix_matrix(std::size_t node) const;

 private:
  struct Node {
    NodeType type;
    Shape in_shape;
    Shape out_shape;
    std::unique_ptr<CouplingBlock<T>> coupling;
    std::size_t coupling_index = 0;
    Tensor<T> q;
    std::size_t part_index = 0;  // kSplit
  };

  Var<T> cond_for(const Node& n, std::span<const Var<T>> cond) const;

  GraphSpec spec_;
  std::vector<Node> nodes_;
  std::vector<CouplingBlock<T>*> couplings_;
  std::vector<Shape> layout_;
};

}  // namespace cinn::flow
