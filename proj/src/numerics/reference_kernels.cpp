// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

// Straightforward serial loops, kept as the ground truth for the parallel
// kernels. Do not optimize these.

#include <algorithm>

#include "cinn/numerics/kernels.hpp"

namespace cinn::kernels::reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, bool trans_a, const T* b, bool trans_b, T* c,
          T beta) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        s += av * bv;
      }
      c[i * n + j] = (beta == T(0) ? T(0) : beta * c[i * n + j]) + s;
    }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          T s = bias ? bias[oc] : T(0);
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < g.kernel; ++ky)
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) || ix >= static_cast<long>(g.width))
                  continue;
                s += w[((oc * g.in_channels + ic) * g.kernel + ky) * g.kernel + kx] *
                     x[((n * g.in_channels + ic) * g.height + iy) * g.width + ix];
              }
          out[((n * g.out_channels + oc) * ho + oy) * wo + ox] = s;
        }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw, T* dbias) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const T d = dout[((n * g.out_channels + oc) * ho + oy) * wo + ox];
          if (dbias) dbias[oc] += d;
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < g.kernel; ++ky)
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) || ix >= static_cast<long>(g.width))
                  continue;
                const std::size_t wi = ((oc * g.in_channels + ic) * g.kernel + ky) * g.kernel + kx;
                const std::size_t xi = ((n * g.in_channels + ic) * g.height + iy) * g.width + ix;
                if (dw) dw[wi] += d * x[xi];
                if (dx) dx[xi] += d * w[wi];
              }
        }
}

template <typename T>
void haar_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x, T* y) {
  // Kernels in (p11, p12, p21, p22) order for a, h, v, d.
  constexpr T kSign[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < h2; ++i)
        for (std::size_t j = 0; j < w2; ++j) {
          const T* base = x + ((n * channels + c) * height) * width;
          const T p[4] = {base[2 * i * width + 2 * j], base[2 * i * width + 2 * j + 1],
                          base[(2 * i + 1) * width + 2 * j], base[(2 * i + 1) * width + 2 * j + 1]};
          for (std::size_t band = 0; band < 4; ++band) {
            T s = 0;
            for (std::size_t q = 0; q < 4; ++q) s += kSign[band][q] * p[q];
            y[((n * 4 * channels + 4 * c + band) * h2 + i) * w2 + j] = T(0.5) * s;
          }
        }
}

template <typename T>
void haar_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y, T* x) {
  // The 4x4 kernel matrix is symmetric and orthogonal, so it is its own inverse.
  constexpr T kSign[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < h2; ++i)
        for (std::size_t j = 0; j < w2; ++j) {
          T bands[4];
          for (std::size_t band = 0; band < 4; ++band) bands[band] = y[((n * 4 * channels + 4 * c + band) * h2 + i) * w2 + j];
          T* base = x + ((n * channels + c) * height) * width;
          T* p[4] = {&base[2 * i * width + 2 * j], &base[2 * i * width + 2 * j + 1], &base[(2 * i + 1) * width + 2 * j],
                     &base[(2 * i + 1) * width + 2 * j + 1]};
          for (std::size_t q = 0; q < 4; ++q) {
            T s = 0;
            for (std::size_t band = 0; band < 4; ++band) s += kSign[band][q] * bands[band];
            *p[q] = T(0.5) * s;
          }
        }
}

template <typename T>
void mix_channels(std::size_t batch, std::size_t channels, std::size_t pixels, const T* q, bool transpose, const T* x,
                  T* y) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t i = 0; i < channels; ++i)
      for (std::size_t p = 0; p < pixels; ++p) {
        T s = 0;
        for (std::size_t j = 0; j < channels; ++j) {
          const T qv = transpose ? q[j * channels + i] : q[i * channels + j];
          s += qv * x[(n * channels + j) * pixels + p];
        }
        y[(n * channels + i) * pixels + p] = s;
      }
}

#define CINN_INSTANTIATE_REFERENCE(T)                                                                  \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, bool, const T*, bool, T*, T); \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);              \
  template void conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);     \
  template void haar_forward<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);     \
  template void haar_inverse<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);     \
  template void mix_channels<T>(std::size_t, std::size_t, std::size_t, const T*, bool, const T*, T*);

CINN_INSTANTIATE_REFERENCE(float)
CINN_INSTANTIATE_REFERENCE(double)

}  // namespace cinn::kernels::reference
