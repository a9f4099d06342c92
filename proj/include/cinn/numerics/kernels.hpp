// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense compute kernels. The functions in cinn::kernels are OpenMP-parallel and
// back every op on the autodiff tape. cinn::kernels::reference holds plain
// serial loops with the same signatures; they exist for tests and benchmarks.
//
// All kernels are deterministic for a fixed thread count: every output element
// is produced by exactly one thread and no cross-thread reductions are used.

#pragma once

#include <cstddef>

namespace cinn::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

// C[M,N] = beta * C + op(A) * op(B), with op(A) of shape [M,K] and op(B) of
// shape [K,N]. When trans_a is set A is stored as [K,M]; likewise B as [N,K].
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, bool trans_a, const T* b, bool trans_b, T* c,
          T beta);

// out[N,O,Ho,Wo] = conv(x, w) + bias. Weights are [O,C,k,k]. bias may be null.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out);

// Accumulates into dx, dw, dbias (any of them may be null).
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw, T* dbias);

// Haar wavelet transform over 2x2 patches. x is [N,C,H,W]; y is [N,4C,H/2,W/2]
// with the four subbands (average, horizontal, vertical, diagonal) of input
// channel c stored at output channels 4c..4c+3.
template <typename T>
void haar_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x, T* y);

// Exact inverse of haar_forward; height and width are the full-resolution
// extents.
template <typename T>
void haar_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y, T* x);

// Space-to-depth reshuffle with the same layout as haar_forward but without the
// wavelet mixing (each output channel is one pixel of the 2x2 patch).
template <typename T>
void squeeze_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x, T* y);

template <typename T>
void squeeze_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y, T* x);

// y[n,:,p] = Q * x[n,:,p] for x of shape [N,C,P]. With transpose set, Q^T is
// applied instead.
template <typename T>
void mix_channels(std::size_t batch, std::size_t channels, std::size_t pixels, const T* q, bool transpose, const T* x,
                  T* y);

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, bool trans_a, const T* b, bool trans_b, T* c,
          T beta);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw, T* dbias);

template <typename T>
void haar_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x, T* y);

template <typename T>
void haar_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y, T* x);

template <typename T>
void mix_channels(std::size_t batch, std::size_t channels, std::size_t pixels, const T* q, bool transpose, const T* x,
                  T* y);

}  // namespace reference
}  // namespace cinn::kernels
