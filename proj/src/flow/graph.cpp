// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/flow/graph.hpp"

#include <Eigen/Dense>

#include "cinn/numerics/ops.hpp"

namespace cinn::flow {

template <typename T>
Tensor<T> orthogonal_init(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw DimensionError("orthogonal_init: dimension must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (std::size_t j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Tensor<T> out(Shape{dim, dim});
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] = static_cast<T>(q(i, j));
  return out;
}

NodeSpec NodeSpec::make_coupling(CouplingSpec c) {
  NodeSpec n;
  n.type = NodeType::kCoupling;
  n.coupling = std::move(c);
  return n;
}

NodeSpec NodeSpec::mix(std::uint64_t seed) {
  NodeSpec n;
  n.type = NodeType::kMix;
  n.mix_seed = seed;
  return n;
}

NodeSpec NodeSpec::haar(bool wavelet) {
  NodeSpec n;
  n.type = NodeType::kHaar;
  n.wavelet = wavelet;
  return n;
}

NodeSpec NodeSpec::split(std::size_t emit) {
  NodeSpec n;
  n.type = NodeType::kSplit;
  n.emit = emit;
  return n;
}

void to_json(nlohmann::json& j, const CouplingSpec& s) {
  j = nlohmann::json{{"split1", s.split1}, {"split2", s.split2}, {"cond_shape", s.cond_shape},
                     {"subnet1", s.subnet1}, {"subnet2", s.subnet2}, {"alpha", s.alpha},
                     {"clamp", s.clamp}};
}

void from_json(const nlohmann::json& j, CouplingSpec& s) {
  s = CouplingSpec{};
  s.split1 = j.at("split1");
  s.split2 = j.at("split2");
  s.cond_shape = j.at("cond_shape").get<Shape>();
  s.subnet1 = j.at("subnet1").get<std::vector<LayerSpec>>();
  s.subnet2 = j.at("subnet2").get<std::vector<LayerSpec>>();
  s.alpha = j.at("alpha");
  s.clamp = j.at("clamp");
}

void to_json(nlohmann::json& j, const NodeSpec& s) {
  switch (s.type) {
    case NodeType::kCoupling:
      j = nlohmann::json{{"type", "coupling"}, {"coupling", s.coupling}};
      break;
    case NodeType::kMix:
      j = nlohmann::json{{"type", "mix"}, {"seed", s.mix_seed}};
      break;
    case NodeType::kHaar:
      j = nlohmann::json{{"type", "haar"}, {"wavelet", s.wavelet}};
      break;
    case NodeType::kSplit:
      j = nlohmann::json{{"type", "split"}, {"emit", s.emit}};
      break;
  }
}

void from_json(const nlohmann::json& j, NodeSpec& s) {
  const std::string type = j.at("type");
  if (type == "coupling") {
    s = NodeSpec::make_coupling(j.at("coupling").get<CouplingSpec>());
  } else if (type == "mix") {
    s = NodeSpec::mix(j.at("seed").get<std::uint64_t>());
  } else if (type == "haar") {
    s = NodeSpec::haar(j.at("wavelet").get<bool>());
  } else if (type == "split") {
    s = NodeSpec::split(j.at("emit").get<std::size_t>());
  } else {
    throw ConfigError("unknown flow node type '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const GraphSpec& s) {
  j = nlohmann::json{{"input_shape", s.input_shape}, {"nodes", s.nodes}};
}

void from_json(const nlohmann::json& j, GraphSpec& s) {
  s.input_shape = j.at("input_shape").get<Shape>();
  s.nodes = j.at("nodes").get<std::vector<NodeSpec>>();
}

template <typename T>
Tensor<T> LatentCode<T>::flatten() const {
  if (parts.empty()) throw DimensionError("LatentCode::flatten: no parts");
  const std::size_t n = batch();
  std::size_t d = 0;
  for (const Tensor<T>& p : parts) {
    if (p.ndim() == 0 || p.dim(0) != n) throw DimensionError("LatentCode::flatten: inconsistent batch sizes");
    d += p.size() / n;
  }
  Tensor<T> out(Shape{n, d});
  std::size_t offset = 0;
  for (const Tensor<T>& p : parts) {
    const std::size_t per = p.size() / n;
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(p.ptr() + i * per, per, out.ptr() + i * d + offset);
    offset += per;
  }
  return out;
}

template <typename T>
LatentCode<T> LatentCode<T>::from_flat(const Tensor<T>& flat, const std::vector<Shape>& layout) {
  std::size_t d = 0;
  for (const Shape& s : layout) d += shape_size(s);
  if (flat.ndim() != 2 || flat.dim(1) != d) {
    throw DimensionError("LatentCode::from_flat: expected [N, " + std::to_string(d) + "], got " +
                         shape_str(flat.shape()));
  }
  const std::size_t n = flat.dim(0);
  LatentCode code;
  std::size_t offset = 0;
  for (const Shape& s : layout) {
    Shape full{n};
    full.insert(full.end(), s.begin(), s.end());
    Tensor<T> p(full);
    const std::size_t per = shape_size(s);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(flat.ptr() + i * d + offset, per, p.ptr() + i * per);
    offset += per;
    code.parts.push_back(std::move(p));
  }
  return code;
}

template <typename T>
FlowGraph<T>::FlowGraph(GraphSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_shape.empty() || shape_size(spec_.input_shape) == 0) {
    throw DimensionError("flow graph: empty input shape");
  }
  Shape shape = spec_.input_shape;
  nodes_.reserve(spec_.nodes.size());
  for (std::size_t i = 0; i < spec_.nodes.size(); ++i) {
    const NodeSpec& ns = spec_.nodes[i];
    const std::string name = "node" + std::to_string(i);
    Node node;
    node.type = ns.type;
    node.in_shape = shape;
    switch (ns.type) {
      case NodeType::kCoupling:
        node.coupling = std::make_unique<CouplingBlock<T>>(ns.coupling, shape, name);
        node.coupling_index = couplings_.size();
        couplings_.push_back(node.coupling.get());
        break;
      case NodeType::kMix:
        node.q = orthogonal_init<T>(shape[0], ns.mix_seed);
        break;
      case NodeType::kHaar:
        if (shape.size() != 3 || shape[1] % 2 || shape[2] % 2) {
          throw DimensionError(name + ": downsampling needs [C, H, W] with even H and W, got " + shape_str(shape));
        }
        shape = {4 * shape[0], shape[1] / 2, shape[2] / 2};
        break;
      case NodeType::kSplit: {
        if (ns.emit == 0 || ns.emit >= shape[0]) {
          throw DimensionError(name + ": cannot emit " + std::to_string(ns.emit) + " of " + std::to_string(shape[0]) +
                               " channels");
        }
        Shape emitted = shape;
        emitted[0] = ns.emit;
        shape[0] -= ns.emit;
        node.part_index = layout_.size();
        layout_.push_back(emitted);
        break;
      }
    }
    node.out_shape = shape;
    nodes_.push_back(std::move(node));
  }
  layout_.push_back(shape);
}

template <typename T>
std::vector<Shape> FlowGraph<T>::cond_shapes() const {
  std::vector<Shape> out;
  for (const CouplingBlock<T>* c : couplings_) out.push_back(c->spec().cond_shape);
  return out;
}

template <typename T>
void FlowGraph<T>::initialize(Rng& rng, bool zero_last) {
  for (CouplingBlock<T>* c : couplings_) {
    c->subnet1().initialize(rng, zero_last);
    c->subnet2().initialize(rng, zero_last);
  }
}

template <typename T>
std::vector<Parameter<T>*> FlowGraph<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (CouplingBlock<T>* c : couplings_)
    for (Parameter<T>* p : c->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> FlowGraph<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (CouplingBlock<T>* c : couplings_) {
    for (auto& b : c->subnet1().buffers()) out.push_back(b);
    for (auto& b : c->subnet2().buffers()) out.push_back(b);
  }
  return out;
}

template <typename T>
const Tensor<T>& FlowGraph<T>::mix_matrix(std::size_t node) const {
  if (node >= nodes_.size() || nodes_[node].type != NodeType::kMix) {
    throw ContractError("mix_matrix: node " + std::to_string(node) + " is not a mixing node");
  }
  return nodes_[node].q;
}

template <typename T>
Var<T> FlowGraph<T>::cond_for(const Node& n, std::span<const Var<T>> cond) const {
  if (cond.empty()) return Var<T>{};
  return cond[n.coupling_index];
}

template <typename T>
typename FlowGraph<T>::ForwardResult FlowGraph<T>::forward(Tape<T>& tape, Var<T> x, std::span<const Var<T>> cond) {
  const Shape& xs = x.shape();
  if (xs.size() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), xs.begin() + 1)) {
    throw DimensionError("flow forward: input " + shape_str(xs) + " does not match graph input " +
                         shape_str(spec_.input_shape));
  }
  if (!cond.empty() && cond.size() != couplings_.size()) {
    throw DimensionError("flow forward: " + std::to_string(cond.size()) + " condition features for " +
                         std::to_string(couplings_.size()) + " coupling blocks");
  }
  const std::size_t n = xs[0];
  ForwardResult result;
  result.parts.resize(layout_.size());
  Var<T> h = x;
  Var<T> logdet = tape.constant(Tensor<T>(Shape{n}));
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& node = nodes_[k];
    switch (node.type) {
      case NodeType::kCoupling: {
        auto r = node.coupling->forward(tape, h, cond_for(node, cond));
        h = r.v;
        logdet = ops::add(logdet, r.logdet);
        break;
      }
      case NodeType::kMix:
        h = ops::mix_channels(h, node.q, false);
        break;
      case NodeType::kHaar:
        h = spec_.nodes[k].wavelet ? ops::haar(h) : ops::squeeze2x2(h);
        break;
      case NodeType::kSplit: {
        const std::size_t keep = node.out_shape[0];
        const std::size_t total = node.in_shape[0];
        result.parts[node.part_index] = ops::slice(h, keep, total);
        h = ops::slice(h, 0, keep);
        break;
      }
    }
  }
  result.parts.back() = h;
  result.logdet = logdet;
  return result;
}

template <typename T>
Var<T> FlowGraph<T>::inverse(Tape<T>& tape, std::span<const Var<T>> parts, std::span<const Var<T>> cond) {
  if (parts.size() != layout_.size()) {
    throw DimensionError("flow inverse: expected " + std::to_string(layout_.size()) + " latent parts, got " +
                         std::to_string(parts.size()));
  }
  if (!cond.empty() && cond.size() != couplings_.size()) {
    throw DimensionError("flow inverse: " + std::to_string(cond.size()) + " condition features for " +
                         std::to_string(couplings_.size()) + " coupling blocks");
  }
  const std::size_t n = parts.front().dim(0);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Shape& s = parts[i].shape();
    if (s.size() != layout_[i].size() + 1 || s[0] != n || !std::equal(layout_[i].begin(), layout_[i].end(), s.begin() + 1)) {
      throw DimensionError("flow inverse: latent part " + std::to_string(i) + " has shape " + shape_str(s) +
                           ", expected [N]+" + shape_str(layout_[i]));
    }
  }
  Var<T> h = parts.back();
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    Node& node = nodes_[k];
    switch (node.type) {
      case NodeType::kCoupling:
        h = node.coupling->inverse(tape, h, cond_for(node, cond));
        break;
      case NodeType::kMix:
        h = ops::mix_channels(h, node.q, true);
        break;
      case NodeType::kHaar:
        h = spec_.nodes[k].wavelet ? ops::haar_inverse(h) : ops::unsqueeze2x2(h);
        break;
      case NodeType::kSplit:
        h = ops::concat(h, parts[node.part_index]);
        break;
    }
  }
  return h;
}

template <typename T>
LatentCode<T> FlowGraph<T>::encode(const Tensor<T>& x, const std::vector<Tensor<T>>& cond, Tensor<T>* logdet) {
  Tape<T> tape(false);
  std::vector<Var<T>> cv;
  for (const Tensor<T>& c : cond) cv.push_back(c.ndim() == 0 ? Var<T>{} : tape.constant(c));
  auto r = forward(tape, tape.constant(x), cv);
  LatentCode<T> code;
  for (const Var<T>& p : r.parts) code.parts.push_back(p.value());
  if (logdet) *logdet = r.logdet.value();
  return code;
}

template <typename T>
Tensor<T> FlowGraph<T>::decode(const LatentCode<T>& z, const std::vector<Tensor<T>>& cond) {
  Tape<T> tape(false);
  std::vector<Var<T>> cv, zv;
  for (const Tensor<T>& c : cond) cv.push_back(c.ndim() == 0 ? Var<T>{} : tape.constant(c));
  for (const Tensor<T>& p : z.parts) zv.push_back(tape.constant(p));
  return inverse(tape, zv, cv).value();
}

template Tensor<float> orthogonal_init<float>(std::size_t, std::uint64_t);
template Tensor<double> orthogonal_init<double>(std::size_t, std::uint64_t);
template struct LatentCode<float>;
template struct LatentCode<double>;
template class FlowGraph<float>;
template class FlowGraph<double>;

}  // namespace cinn::flow
