// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/flow/coupling.hpp"

#include <cmath>
#include <numbers>

#include "cinn/numerics/ops.hpp"

namespace cinn::flow {

template <typename T>
Tensor<T> clamp_scale(const Tensor<T>& s, T alpha) {
  if (!(alpha > T(0))) throw ConfigError("clamp alpha must be positive");
  Tensor<T> out(s.shape());
  const T k = T(2) * alpha / std::numbers::pi_v<T>;
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = k * std::atan(s[i] / alpha);
  return out;
}

template <typename T>
Var<T> clamp_scale(Var<T> s, T alpha) {
  if (!(alpha > T(0))) throw ConfigError("clamp alpha must be positive");
  return ops::scale(ops::arctan(ops::scale(s, T(1) / alpha)), T(2) * alpha / std::numbers::pi_v<T>);
}

std::vector<LayerSpec> mlp_subnet(std::size_t in, std::size_t out, std::size_t hidden, std::size_t hidden_layers,
                                  double slope) {
  std::vector<LayerSpec> layers;
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    layers.push_back(LayerSpec::linear(width, hidden));
    layers.push_back(LayerSpec::leaky_relu(slope));
    width = hidden;
  }
  layers.push_back(LayerSpec::linear(width, out));
  return layers;
}

std::vector<LayerSpec> conv_subnet(std::size_t in, std::size_t out, std::size_t hidden, std::size_t hidden_layers,
                                   double slope) {
  std::vector<LayerSpec> layers;
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    layers.push_back(LayerSpec::conv(width, hidden));
    layers.push_back(LayerSpec::leaky_relu(slope));
    width = hidden;
  }
  layers.push_back(LayerSpec::conv(width, out));
  return layers;
}

CouplingSpec fc_coupling(std::size_t features, std::size_t cond_features, std::size_t hidden,
                         std::size_t hidden_layers, double alpha, bool clamp) {
  CouplingSpec s;
  s.split1 = features / 2;
  s.split2 = features - s.split1;
  if (cond_features) s.cond_shape = {cond_features};
  s.subnet1 = mlp_subnet(s.split2 + cond_features, 2 * s.split1, hidden, hidden_layers);
  s.subnet2 = mlp_subnet(s.split1 + cond_features, 2 * s.split2, hidden, hidden_layers);
  s.alpha = alpha;
  s.clamp = clamp;
  return s;
}

CouplingSpec conv_coupling(std::size_t channels, std::size_t cond_channels, std::size_t height, std::size_t width,
                           std::size_t hidden, std::size_t hidden_layers, double alpha, bool clamp) {
  CouplingSpec s;
  s.split1 = channels / 2;
  s.split2 = channels - s.split1;
  if (cond_channels) s.cond_shape = {cond_channels, height, width};
  s.subnet1 = conv_subnet(s.split2 + cond_channels, 2 * s.split1, hidden, hidden_layers);
  s.subnet2 = conv_subnet(s.split1 + cond_channels, 2 * s.split2, hidden, hidden_layers);
  s.alpha = alpha;
  s.clamp = clamp;
  return s;
}

template <typename T>
CouplingBlock<T>::CouplingBlock(CouplingSpec spec, Shape sample_shape, std::string name)
    : spec_(std::move(spec)),
      sample_shape_(std::move(sample_shape)),
      subnet1_(name + ".s1t1", spec_.subnet1),
      subnet2_(name + ".s2t2", spec_.subnet2) {
  if (sample_shape_.empty()) throw DimensionError(name + ": coupling input has no channel axis");
  if (shape_size(sample_shape_) < 2 || spec_.split1 == 0 || spec_.split2 == 0) {
    throw DimensionError(name + ": coupling blocks need an input dimension of at least 2, got " +
                         shape_str(sample_shape_));
  }
  if (spec_.split1 + spec_.split2 != sample_shape_[0]) {
    throw DimensionError(name + ": split " + std::to_string(spec_.split1) + "+" + std::to_string(spec_.split2) +
                         " does not cover input " + shape_str(sample_shape_));
  }
  if (!(spec_.alpha > 0)) throw ConfigError(name + ": clamp alpha must be positive");
  if (!spec_.cond_shape.empty()) {
    if (spec_.cond_shape.size() != sample_shape_.size() ||
        !std::equal(spec_.cond_shape.begin() + 1, spec_.cond_shape.end(), sample_shape_.begin() + 1)) {
      throw DimensionError(name + ": condition " + shape_str(spec_.cond_shape) +
                           " must share the non-channel extents of " + shape_str(sample_shape_));
    }
  }
  const std::size_t cond_c = spec_.cond_shape.empty() ? 0 : spec_.cond_shape[0];
  auto expect = [&](const Sequential<T>& net, std::size_t in_c, std::size_t out_c) {
    Shape in = sample_shape_;
    in[0] = in_c + cond_c;
    Shape out = net.output_shape(in);
    Shape want = sample_shape_;
    want[0] = 2 * out_c;
    if (out != want) {
      throw DimensionError(net.name() + ": subnetwork maps " + shape_str(in) + " to " + shape_str(out) + ", expected " +
                           shape_str(want));
    }
  };
  expect(subnet1_, spec_.split2, spec_.split1);
  expect(subnet2_, spec_.split1, spec_.split2);
}

template <typename T>
void CouplingBlock<T>::check_input(Var<T> u, Var<T> cond, const char* where) const {
  const Shape& s = u.shape();
  if (s.size() != sample_shape_.size() + 1 || !std::equal(sample_shape_.begin(), sample_shape_.end(), s.begin() + 1)) {
    throw DimensionError(std::string(where) + ": input " + shape_str(s) + " does not match block shape " +
                         shape_str(sample_shape_));
  }
  if (spec_.cond_shape.empty()) {
    if (cond.valid()) throw DimensionError(std::string(where) + ": unconditional block received a condition");
    return;
  }
  if (!cond.valid()) throw DimensionError(std::string(where) + ": conditional block received no condition");
  const Shape& cs = cond.shape();
  if (cs.size() != spec_.cond_shape.size() + 1 || cs[0] != s[0] ||
      !std::equal(spec_.cond_shape.begin(), spec_.cond_shape.end(), cs.begin() + 1)) {
    throw DimensionError(std::string(where) + ": condition " + shape_str(cs) + " does not match expected " +
                         shape_str(spec_.cond_shape));
  }
}

template <typename T>
std::pair<Var<T>, Var<T>> CouplingBlock<T>::scale_and_shift(Tape<T>& tape, Sequential<T>& net, Var<T> x, Var<T> cond,
                                                            std::size_t channels) {
  Var<T> in = cond.valid() ? ops::concat(x, cond) : x;
  Var<T> st = net.forward(tape, in, tape.grad_enabled());
  Var<T> s = ops::slice(st, 0, channels);
  Var<T> t = ops::slice(st, channels, 2 * channels);
  if (spec_.clamp) s = clamp_scale(s, static_cast<T>(spec_.alpha));
  return {s, t};
}

template <typename T>
typename CouplingBlock<T>::Result CouplingBlock<T>::forward(Tape<T>& tape, Var<T> u, Var<T> cond) {
  check_input(u, cond, "coupling_forward");
  const std::size_t c1 = spec_.split1, c2 = spec_.split2;
  Var<T> u1 = ops::slice(u, 0, c1);
  Var<T> u2 = ops::slice(u, c1, c1 + c2);
  auto [s1, t1] = scale_and_shift(tape, subnet1_, u2, cond, c1);
  Var<T> v1 = ops::add(ops::mul(u1, ops::exp(s1)), t1);
  auto [s2, t2] = scale_and_shift(tape, subnet2_, v1, cond, c2);
  Var<T> v2 = ops::add(ops::mul(u2, ops::exp(s2)), t2);
  Var<T> logdet = ops::add(ops::sum_per_sample(s1), ops::sum_per_sample(s2));
  return {ops::concat(v1, v2), logdet};
}

template <typename T>
Var<T> CouplingBlock<T>::inverse(Tape<T>& tape, Var<T> v, Var<T> cond) {
  check_input(v, cond, "coupling_inverse");
  const std::size_t c1 = spec_.split1, c2 = spec_.split2;
  Var<T> v1 = ops::slice(v, 0, c1);
  Var<T> v2 = ops::slice(v, c1, c1 + c2);
  auto [s2, t2] = scale_and_shift(tape, subnet2_, v1, cond, c2);
  Var<T> u2 = ops::mul(ops::sub(v2, t2), ops::exp(ops::scale(s2, T(-1))));
  auto [s1, t1] = scale_and_shift(tape, subnet1_, u2, cond, c1);
  Var<T> u1 = ops::mul(ops::sub(v1, t1), ops::exp(ops::scale(s1, T(-1))));
  return ops::concat(u1, u2);
}

template <typename T>
std::vector<Parameter<T>*> CouplingBlock<T>::parameters() {
  std::vector<Parameter<T>*> out = subnet1_.parameters();
  for (Parameter<T>* p : subnet2_.parameters()) out.push_back(p);
  return out;
}

template Tensor<float> clamp_scale<float>(const Tensor<float>&, float);
template Tensor<double> clamp_scale<double>(const Tensor<double>&, double);
template Var<float> clamp_scale<float>(Var<float>, float);
template Var<double> clamp_scale<double>(Var<double>, double);
template class CouplingBlock<float>;
template class CouplingBlock<double>;

}  // namespace cinn::flow
