// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/numerics/layers.hpp"

#include <cmath>

#include "cinn/numerics/ops.hpp"

namespace cinn {
namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kLinear:
      return "linear";
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kLeakyRelu:
      return "leaky_relu";
    case LayerKind::kBatchNorm:
      return "batch_norm";
    case LayerKind::kFlatten:
      return "flatten";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "linear") return LayerKind::kLinear;
  if (s == "conv") return LayerKind::kConv;
  if (s == "leaky_relu") return LayerKind::kLeakyRelu;
  if (s == "batch_norm") return LayerKind::kBatchNorm;
  if (s == "flatten") return LayerKind::kFlatten;
  throw ConfigError("unknown layer kind '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = nlohmann::json{{"kind", kind_name(s.kind)}};
  switch (s.kind) {
    case LayerKind::kLinear:
      j["in"] = s.in;
      j["out"] = s.out;
      break;
    case LayerKind::kConv:
      j["in"] = s.in;
      j["out"] = s.out;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["pad"] = s.pad;
      break;
    case LayerKind::kLeakyRelu:
      j["slope"] = s.slope;
      break;
    case LayerKind::kBatchNorm:
      j["channels"] = s.in;
      j["eps"] = s.eps;
      j["momentum"] = s.momentum;
      break;
    case LayerKind::kFlatten:
      break;
  }
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (s.kind) {
    case LayerKind::kLinear:
      s.in = j.at("in");
      s.out = j.at("out");
      break;
    case LayerKind::kConv:
      s.in = j.at("in");
      s.out = j.at("out");
      s.kernel = j.at("kernel");
      s.stride = j.at("stride");
      s.pad = j.at("pad");
      break;
    case LayerKind::kLeakyRelu:
      s.slope = j.at("slope");
      break;
    case LayerKind::kBatchNorm:
      s.in = s.out = j.at("channels");
      s.eps = j.at("eps");
      s.momentum = j.at("momentum");
      break;
    case LayerKind::kFlatten:
      break;
  }
}

template <typename T>
Sequential<T>::Sequential(std::string name, std::vector<LayerSpec> specs) : name_(std::move(name)) {
  layers_.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Layer l;
    l.spec = specs[i];
    const std::string prefix = name_ + "." + std::to_string(i);
    switch (l.spec.kind) {
      case LayerKind::kLinear:
        l.weight = Parameter<T>(prefix + ".weight", Shape{l.spec.out, l.spec.in});
        l.bias = Parameter<T>(prefix + ".bias", Shape{l.spec.out});
        break;
      case LayerKind::kConv:
        l.weight = Parameter<T>(prefix + ".weight", Shape{l.spec.out, l.spec.in, l.spec.kernel, l.spec.kernel});
        l.bias = Parameter<T>(prefix + ".bias", Shape{l.spec.out});
        break;
      case LayerKind::kBatchNorm:
        l.weight = Parameter<T>(prefix + ".gamma", Shape{l.spec.in});
        l.bias = Parameter<T>(prefix + ".beta", Shape{l.spec.in});
        l.weight.value.fill(T(1));
        l.running_mean = Tensor<T>(Shape{l.spec.in});
        l.running_var = Tensor<T>(Shape{l.spec.in}, T(1));
        break;
      default:
        break;
    }
    layers_.push_back(std::move(l));
  }
}

template <typename T>
std::vector<LayerSpec> Sequential<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const Layer& l : layers_) out.push_back(l.spec);
  return out;
}

template <typename T>
Var<T> Sequential<T>::forward(Tape<T>& tape, Var<T> x, bool training) {
  for (Layer& l : layers_) {
    switch (l.spec.kind) {
      case LayerKind::kLinear:
        x = ops::affine(x, tape.parameter(l.weight), tape.parameter(l.bias));
        break;
      case LayerKind::kConv:
        x = ops::conv2d(x, tape.parameter(l.weight), tape.parameter(l.bias), l.spec.stride, l.spec.pad);
        break;
      case LayerKind::kLeakyRelu:
        x = ops::leaky_relu(x, static_cast<T>(l.spec.slope));
        break;
      case LayerKind::kBatchNorm:
        if (training) {
          Tensor<T> mu, var;
          x = ops::batch_norm_train(x, tape.parameter(l.weight), tape.parameter(l.bias), static_cast<T>(l.spec.eps), &mu,
                                    &var);
          const T m = static_cast<T>(l.spec.momentum);
          for (std::size_t c = 0; c < l.spec.in; ++c) {
            l.running_mean[c] = (T(1) - m) * l.running_mean[c] + m * mu[c];
            l.running_var[c] = (T(1) - m) * l.running_var[c] + m * var[c];
          }
        } else {
          x = ops::batch_norm_eval(x, tape.parameter(l.weight), tape.parameter(l.bias), l.running_mean, l.running_var,
                                   static_cast<T>(l.spec.eps));
        }
        break;
      case LayerKind::kFlatten: {
        const Shape& s = x.shape();
        x = ops::reshape(x, Shape{s[0], x.value().size() / std::max<std::size_t>(s[0], 1)});
        break;
      }
    }
  }
  return x;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& sample_shape) const {
  Shape s = sample_shape;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i].spec;
    const std::string where = name_ + " layer " + std::to_string(i) + ": ";
    switch (spec.kind) {
      case LayerKind::kLinear:
        if (s.size() != 1 || s[0] != spec.in)
          throw DimensionError(where + "linear expects " + std::to_string(spec.in) + " features, got " + shape_str(s));
        s = {spec.out};
        break;
      case LayerKind::kConv: {
        if (s.size() != 3 || s[0] != spec.in)
          throw DimensionError(where + "conv expects " + std::to_string(spec.in) + " channels, got " + shape_str(s));
        const std::size_t ho = (s[1] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        const std::size_t wo = (s[2] + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        s = {spec.out, ho, wo};
        break;
      }
      case LayerKind::kBatchNorm:
        if (s.empty() || s[0] != spec.in) throw DimensionError(where + "batch norm channel mismatch at " + shape_str(s));
        break;
      case LayerKind::kFlatten:
        s = {shape_size(s)};
        break;
      case LayerKind::kLeakyRelu:
        break;
    }
  }
  return s;
}

template <typename T>
void Sequential<T>::initialize(Rng& rng, bool zero_last) {
  std::size_t last = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    if (l.spec.kind == LayerKind::kLinear || l.spec.kind == LayerKind::kConv) {
      const double receptive = l.spec.kind == LayerKind::kConv ? double(l.spec.kernel * l.spec.kernel) : 1.0;
      const double fan_in = double(l.spec.in) * receptive;
      const double fan_out = double(l.spec.out) * receptive;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      fill_uniform(l.weight.value, rng, -limit, limit);
      l.bias.value.fill(T(0));
      last = i;
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      l.weight.value.fill(T(1));
      l.bias.value.fill(T(0));
      l.running_mean.fill(T(0));
      l.running_var.fill(T(1));
    }
  }
  if (zero_last && last < layers_.size()) {
    layers_[last].weight.value.fill(T(0));
    layers_[last].bias.value.fill(T(0));
  }
  for (Layer& l : layers_) {
    l.weight.zero_grad();
    l.bias.zero_grad();
  }
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kLinear || l.spec.kind == LayerKind::kConv || l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Sequential<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    if (l.spec.kind != LayerKind::kBatchNorm) continue;
    const std::string prefix = name_ + "." + std::to_string(i);
    out.emplace_back(prefix + ".running_mean", &l.running_mean);
    out.emplace_back(prefix + ".running_var", &l.running_var);
  }
  return out;
}

template <typename T>
void Sequential<T>::set_trainable(bool trainable) {
  for (Parameter<T>* p : parameters()) p->trainable = trainable;
}

template class Sequential<float>;
template class Sequential<double>;

}  // namespace cinn
