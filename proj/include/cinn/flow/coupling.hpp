// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Conditional affine coupling block.
//
// The input u is split along the channel axis into [u1, u2] and transformed as
//
//   v1 = u1 * exp(s1(u2, c)) + t1(u2, c)
//   v2 = u2 * exp(s2(v1, c)) + t2(v1, c)
//
// with every scale exponent passed through clamp_scale. Each (s_j, t_j) pair is
// one subnetwork whose output channels are split into the s and t halves; the
// condition is concatenated to the subnetwork input along the channel axis.
// The log-determinant is the sum of both clamped scale maps.

#pragma once

#include <string>
#include <vector>

#include "cinn/numerics/layers.hpp"
#include "cinn/numerics/tape.hpp"

namespace cinn::flow {

inline constexpr double kDefaultClampAlpha = 1.9;

// Element-wise (2 alpha / pi) * atan(s / alpha): odd, strictly increasing and
// bounded in (-alpha, alpha).
template <typename T>
Tensor<T> clamp_scale(const Tensor<T>& s, T alpha);
template <typename T>
Var<T> clamp_scale(Var<T> s, T alpha);

struct CouplingSpec {
  std::size_t split1 = 0;  // channels (or features) of u1
  std::size_t split2 = 0;  // channels (or features) of u2
  Shape cond_shape;        // per-sample condition shape; empty when unconditional
  std::vector<LayerSpec> subnet1;  // (u2, c) -> (s1, t1)
  std::vector<LayerSpec> subnet2;  // (v1, c) -> (s2, t2)
  double alpha = kDefaultClampAlpha;
  bool clamp = true;

  friend bool operator==(const CouplingSpec&, const CouplingSpec&) = default;
};

// Fully connected subnetwork: in -> hidden (x hidden_layers) -> out.
std::vector<LayerSpec> mlp_subnet(std::size_t in, std::size_t out, std::size_t hidden, std::size_t hidden_layers,
                                  double slope = 0.01);
// 3x3 convolutional subnetwork with the same structure.
std::vector<LayerSpec> conv_subnet(std::size_t in, std::size_t out, std::size_t hidden, std::size_t hidden_layers,
                                   double slope = 0.01);

// Coupling over [N, F] inputs with fully connected subnetworks.
CouplingSpec fc_coupling(std::size_t features, std::size_t cond_features, std::size_t hidden,
                         std::size_t hidden_layers = 1, double alpha = kDefaultClampAlpha, bool clamp = true);
// Coupling over [N, C, H, W] inputs with convolutional subnetworks; the
// condition must have shape [cond_channels, H, W].
CouplingSpec conv_coupling(std::size_t channels, std::size_t cond_channels, std::size_t height, std::size_t width,
                           std::size_t hidden, std::size_t hidden_layers = 1, double alpha = kDefaultClampAlpha,
                           bool clamp = true);

template <typename T>
class CouplingBlock {
 public:
  struct Result {
    Var<T> v;
    Var<T> logdet;  // [N]
  };

  // sample_shape is the per-sample input shape ({F} or {C, H, W}).
  CouplingBlock(CouplingSpec spec, Shape sample_shape, std::string name);

  const CouplingSpec& spec() const { return spec_; }
  const Shape& sample_shape() const { return sample_shape_; }
  bool conditional() const { return !spec_.cond_shape.empty(); }

  Result forward(Tape<T>& tape, Var<T> u, Var<T> cond);
  Var<T> inverse(Tape<T>& tape, Var<T> v, Var<T> cond);

  Sequential<T>& subnet1() { return subnet1_; }
  Sequential<T>& subnet2() { return subnet2_; }
  std::vector<Parameter<T>*> parameters();

 private:
  // Runs a subnetwork on (x, cond) and returns the (clamped s, t) halves.
  std::pair<Var<T>, Var<T>> scale_and_shift(Tape<T>& tape, Sequential<T>& net, Var<T> x, Var<T> cond,
                                            std::size_t channels);
  void check_input(Var<T> u, Var<T> cond, const char* where) const;

  CouplingSpec spec_;
  Shape sample_shape_;
  Sequential<T> subnet1_;
  Sequential<T> subnet2_;
};

}  // namespace cinn::flow
