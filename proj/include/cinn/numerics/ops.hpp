// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives recorded on a Tape. Batched tensors carry the
// sample index on axis 0 and channels/features on axis 1; everything after
// axis 1 is treated as spatial.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cinn/numerics/tape.hpp"

namespace cinn::ops {

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
template <typename T>
Var<T> exp(Var<T> a);
template <typename T>
Var<T> arctan(Var<T> a);
template <typename T>
Var<T> leaky_relu(Var<T> a, T slope);
template <typename T>
Var<T> square(Var<T> a);

// Reductions to a scalar.
template <typename T>
Var<T> sum(Var<T> a);
template <typename T>
Var<T> mean(Var<T> a);
// Sum over every axis except the first: [N, ...] -> [N].
template <typename T>
Var<T> sum_per_sample(Var<T> a);

// [M,K] x [K,N] -> [M,N]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
// x [N,in], weight [out,in], bias [out] -> x W^T + b
template <typename T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias);
// x [N,C,H,W], weight [O,C,k,k], bias [O]; zero padding.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride, std::size_t pad);

// Channel axis (axis 1) concatenation and slicing; other axes must agree.
template <typename T>
Var<T> concat(std::span<const Var<T>> parts);
template <typename T>
Var<T> concat(Var<T> a, Var<T> b);
template <typename T>
Var<T> slice(Var<T> a, std::size_t begin, std::size_t end);
template <typename T>
Var<T> reshape(Var<T> a, Shape shape);

// [N,C,H,W] <-> [N,4C,H/2,W/2]; see kernels::haar_forward for the layout.
template <typename T>
Var<T> haar(Var<T> a);
template <typename T>
Var<T> haar_inverse(Var<T> a);
template <typename T>
Var<T> squeeze2x2(Var<T> a);
template <typename T>
Var<T> unsqueeze2x2(Var<T> a);

// Per-pixel channel mixing with a fixed square matrix q (not differentiated).
template <typename T>
Var<T> mix_channels(Var<T> a, const Tensor<T>& q, bool transpose);

// Batch normalization with statistics over all axes but 1. The batch mean and
// biased variance are written to batch_mean/batch_var for running averages.
template <typename T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, T eps, Tensor<T>* batch_mean, Tensor<T>* batch_var);
template <typename T>
Var<T> batch_norm_eval(Var<T> x, Var<T> gamma, Var<T> beta, const Tensor<T>& mean, const Tensor<T>& var, T eps);

// Mean softmax cross-entropy of logits [N,K] against integer labels.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels);

}  // namespace cinn::ops
