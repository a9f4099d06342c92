// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/numerics/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace cinn::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kTile) {
    const std::size_t i1 = std::min(rows, i0 + kTile);
    for (std::size_t j0 = 0; j0 < cols; j0 += kTile) {
      const std::size_t j1 = std::min(cols, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
    }
  }
}

// C[M,N] += A[M,K] * B[K,N], all row-major and contiguous. Four rows of C are
// updated per pass over a K panel so each loaded row of B is reused four times.
template <typename T>
void gemm_nn_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  constexpr std::size_t kPanelK = 128;
  constexpr std::size_t kPanelN = 512;
  constexpr std::size_t kRows = 4;
  const std::size_t row_blocks = (m + kRows - 1) / kRows;
  const bool parallel = m * n * k >= kParallelWork && row_blocks > 1;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t rb = 0; rb < row_blocks; ++rb) {
    const std::size_t i0 = rb * kRows;
    const std::size_t rows = std::min(kRows, m - i0);
    for (std::size_t kb = 0; kb < k; kb += kPanelK) {
      const std::size_t ke = std::min(k, kb + kPanelK);
      for (std::size_t nb = 0; nb < n; nb += kPanelN) {
        const std::size_t ne = std::min(n, nb + kPanelN);
        if (rows == kRows) {
          T* c0 = c + i0 * n;
          T* c1 = c0 + n;
          T* c2 = c1 + n;
          T* c3 = c2 + n;
          for (std::size_t p = kb; p < ke; ++p) {
            const T a0 = a[i0 * k + p];
            const T a1 = a[(i0 + 1) * k + p];
            const T a2 = a[(i0 + 2) * k + p];
            const T a3 = a[(i0 + 3) * k + p];
            const T* brow = b + p * n;
#pragma omp simd
            for (std::size_t j = nb; j < ne; ++j) {
              const T bj = brow[j];
              c0[j] += a0 * bj;
              c1[j] += a1 * bj;
              c2[j] += a2 * bj;
              c3[j] += a3 * bj;
            }
          }
        } else {
          for (std::size_t i = i0; i < i0 + rows; ++i) {
            T* ci = c + i * n;
            for (std::size_t p = kb; p < ke; ++p) {
              const T av = a[i * k + p];
              const T* brow = b + p * n;
#pragma omp simd
              for (std::size_t j = nb; j < ne; ++j) ci[j] += av * brow[j];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  const std::size_t kk = g.kernel;
  for (std::size_t ch = 0; ch < g.in_channels; ++ch) {
    const T* xc = x + ch * g.height * g.width;
    for (std::size_t ky = 0; ky < kk; ++ky) {
      for (std::size_t kx = 0; kx < kk; ++kx) {
        T* row = col + ((ch * kk + ky) * kk + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          T* out = row + oy * wo;
          if (iy < 0 || iy >= static_cast<long>(g.height)) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* xrow = xc + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<long>(g.width)) ? T(0) : xrow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  const std::size_t kk = g.kernel;
  for (std::size_t ch = 0; ch < g.in_channels; ++ch) {
    T* dxc = dx + ch * g.height * g.width;
    for (std::size_t ky = 0; ky < kk; ++ky) {
      for (std::size_t kx = 0; kx < kk; ++kx) {
        const T* row = col + ((ch * kk + ky) * kk + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          T* dxrow = dxc + static_cast<std::size_t>(iy) * g.width;
          const T* in = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.width)) dxrow[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, bool trans_a, const T* b, bool trans_b, T* c,
          T beta) {
  if (beta == T(0)) {
    std::fill(c, c + m * n, T(0));
  } else if (beta != T(1)) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<T> at;
  std::vector<T> bt;
  if (trans_a) {
    at.resize(m * k);
    transpose(k, m, a, at.data());
    a = at.data();
  }
  if (trans_b) {
    bt.resize(k * n);
    transpose(n, k, b, bt.data());
    b = bt.data();
  }
  gemm_nn_accumulate(m, n, k, a, b, c);
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  const std::size_t patch = g.in_channels * g.kernel * g.kernel;
  const std::size_t in_size = g.in_channels * g.height * g.width;
  const std::size_t out_size = g.out_channels * ho * wo;
  const bool parallel = g.batch > 1 && g.batch * out_size * patch >= kParallelWork;

#pragma omp parallel if (parallel)
  {
    std::vector<T> col(patch * ho * wo);
#pragma omp for schedule(static)
    for (std::size_t n = 0; n < g.batch; ++n) {
      im2col(g, x + n * in_size, col.data());
      T* o = out + n * out_size;
      if (bias) {
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) std::fill(o + oc * ho * wo, o + (oc + 1) * ho * wo, bias[oc]);
      } else {
        std::fill(o, o + out_size, T(0));
      }
      gemm_nn_accumulate(g.out_channels, ho * wo, patch, w, col.data(), o);
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dout, T* dx, T* dw, T* dbias) {
  const std::size_t ho = g.out_height();
  const std::size_t wo = g.out_width();
  const std::size_t pixels = ho * wo;
  const std::size_t patch = g.in_channels * g.kernel * g.kernel;
  const std::size_t in_size = g.in_channels * g.height * g.width;
  const std::size_t out_size = g.out_channels * pixels;

  if (dbias) {
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const T* d = dout + n * out_size + oc * pixels;
        T s = 0;
        for (std::size_t p = 0; p < pixels; ++p) s += d[p];
        dbias[oc] += s;
      }
  }

  if (dx) {
    std::vector<T> wt(patch * g.out_channels);
    transpose(g.out_channels, patch, w, wt.data());
    const bool parallel = g.batch > 1 && g.batch * out_size * patch >= kParallelWork;
#pragma omp parallel if (parallel)
    {
      std::vector<T> dcol(patch * pixels);
#pragma omp for schedule(static)
      for (std::size_t n = 0; n < g.batch; ++n) {
        std::fill(dcol.begin(), dcol.end(), T(0));
        gemm_nn_accumulate(patch, pixels, g.out_channels, wt.data(), dout + n * out_size, dcol.data());
        col2im_accumulate(g, dcol.data(), dx + n * in_size);
      }
    }
  }

  if (dw) {
    // Sample contributions are summed in order so the result does not depend
    // on the thread count; the gemm itself parallelizes over output channels.
    std::vector<T> col(patch * pixels);
    std::vector<T> colt(pixels * patch);
    for (std::size_t n = 0; n < g.batch; ++n) {
      im2col(g, x + n * in_size, col.data());
      transpose(patch, pixels, col.data(), colt.data());
      gemm_nn_accumulate(g.out_channels, patch, pixels, dout + n * out_size, colt.data(), dw);
    }
  }
}

template <typename T>
void haar_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x, T* y) {
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  const std::size_t planes = batch * channels;
#pragma omp parallel for schedule(static) if (planes * height * width >= kParallelWork)
  for (std::size_t pc = 0; pc < planes; ++pc) {
    const T* xp = x + pc * height * width;
    T* a = y + pc * 4 * h2 * w2;
    T* hh = a + h2 * w2;
    T* vv = hh + h2 * w2;
    T* dd = vv + h2 * w2;
    for (std::size_t i = 0; i < h2; ++i) {
      const T* r0 = xp + 2 * i * width;
      const T* r1 = r0 + width;
      for (std::size_t j = 0; j < w2; ++j) {
        const T p11 = r0[2 * j], p12 = r0[2 * j + 1], p21 = r1[2 * j], p22 = r1[2 * j + 1];
        const std::size_t o = i * w2 + j;
        a[o] = T(0.5) * (p11 + p12 + p21 + p22);
        hh[o] = T(0.5) * (p11 - p12 + p21 - p22);
        vv[o] = T(0.5) * (p11 + p12 - p21 - p22);
        dd[o] = T(0.5) * (p11 - p12 - p21 + p22);
      }
    }
  }
}

template <typename T>
void haar_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y, T* x) {
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  const std::size_t planes = batch * channels;
#pragma omp parallel for schedule(static) if (planes * height * width >= kParallelWork)
  for (std::size_t pc = 0; pc < planes; ++pc) {
    T* xp = x + pc * height * width;
    const T* a = y + pc * 4 * h2 * w2;
    const T* hh = a + h2 * w2;
    const T* vv = hh + h2 * w2;
    const T* dd = vv + h2 * w2;
    for (std::size_t i = 0; i < h2; ++i) {
      T* r0 = xp + 2 * i * width;
      T* r1 = r0 + width;
      for (std::size_t j = 0; j < w2; ++j) {
        const std::size_t o = i * w2 + j;
        r0[2 * j] = T(0.5) * (a[o] + hh[o] + vv[o] + dd[o]);
        r0[2 * j + 1] = T(0.5) * (a[o] - hh[o] + vv[o] - dd[o]);
        r1[2 * j] = T(0.5) * (a[o] + hh[o] - vv[o] - dd[o]);
        r1[2 * j + 1] = T(0.5) * (a[o] - hh[o] - vv[o] + dd[o]);
      }
    }
  }
}

template <typename T>
void squeeze_forward(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* x,
                     T* y) {
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  const std::size_t planes = batch * channels;
#pragma omp parallel for schedule(static) if (planes * height * width >= kParallelWork)
  for (std::size_t pc = 0; pc < planes; ++pc) {
    const T* xp = x + pc * height * width;
    T* out = y + pc * 4 * h2 * w2;
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) {
        const std::size_t o = i * w2 + j;
        out[o] = xp[2 * i * width + 2 * j];
        out[h2 * w2 + o] = xp[2 * i * width + 2 * j + 1];
        out[2 * h2 * w2 + o] = xp[(2 * i + 1) * width + 2 * j];
        out[3 * h2 * w2 + o] = xp[(2 * i + 1) * width + 2 * j + 1];
      }
  }
}

template <typename T>
void squeeze_inverse(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, const T* y,
                     T* x) {
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  const std::size_t planes = batch * channels;
#pragma omp parallel for schedule(static) if (planes * height * width >= kParallelWork)
  for (std::size_t pc = 0; pc < planes; ++pc) {
    T* xp = x + pc * height * width;
    const T* in = y + pc * 4 * h2 * w2;
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) {
        const std::size_t o = i * w2 + j;
        xp[2 * i * width + 2 * j] = in[o];
        xp[2 * i * width + 2 * j + 1] = in[h2 * w2 + o];
        xp[(2 * i + 1) * width + 2 * j] = in[2 * h2 * w2 + o];
        xp[(2 * i + 1) * width + 2 * j + 1] = in[3 * h2 * w2 + o];
      }
  }
}

template <typename T>
void mix_channels(std::size_t batch, std::size_t channels, std::size_t pixels, const T* q, bool transpose_q,
                  const T* x, T* y) {
  if (pixels == 1) {
    // [N,C] case: Y = X Q^T (or X Q when transposed), a single gemm.
    gemm(batch, channels, channels, x, false, q, !transpose_q, y, T(0));
    return;
  }
  const bool parallel = batch > 1 && batch * channels * channels * pixels >= kParallelWork;
#pragma omp parallel if (parallel)
  {
    std::vector<T> qt;
    const T* qm = q;
    if (transpose_q) {
      qt.resize(channels * channels);
      transpose(channels, channels, q, qt.data());
      qm = qt.data();
    }
#pragma omp for schedule(static)
    for (std::size_t n = 0; n < batch; ++n) {
      T* yn = y + n * channels * pixels;
      std::fill(yn, yn + channels * pixels, T(0));
      gemm_nn_accumulate(channels, pixels, channels, qm, x + n * channels * pixels, yn);
    }
  }
}

#define CINN_INSTANTIATE_KERNELS(T)                                                                              \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, bool, const T*, bool, T*, T);           \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);                        \
  template void conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);               \
  template void haar_forward<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);               \
  template void haar_inverse<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);               \
  template void squeeze_forward<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);            \
  template void squeeze_inverse<T>(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);            \
  template void mix_channels<T>(std::size_t, std::size_t, std::size_t, const T*, bool, const T*, T*);

CINN_INSTANTIATE_KERNELS(float)
CINN_INSTANTIATE_KERNELS(double)

}  // namespace cinn::kernels
