// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cinn/numerics/kernels.hpp"

namespace cinn::ops {
namespace {

constexpr std::size_t kParallelElems = 1 << 14;

template <typename T>
void require_same_tape(const char* op, Var<T> a, Var<T> b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
}

template <typename T>
void require_same_shape(const char* op, Var<T> a, Var<T> b) {
  require_same_tape(op, a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.ptr();
  const T* s = src.ptr();
  const std::size_t n = src.size();
#pragma omp parallel for simd schedule(static) if (n >= kParallelElems)
  for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

// [N, C, P] view of a batched tensor.
struct ChannelView {
  std::size_t batch;
  std::size_t channels;
  std::size_t pixels;
};

ChannelView channel_view(const Shape& s, const char* op) {
  if (s.size() < 2) throw DimensionError(std::string(op) + ": expected a batched tensor with a channel axis");
  std::size_t p = 1;
  for (std::size_t i = 2; i < s.size(); ++i) p *= s[i];
  return {s[0], s[1], p};
}

template <typename T, typename F, typename G>
Var<T> unary(const char* op, Var<T> a, F f, G df) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  const T* x = av.ptr();
  T* y = out.ptr();
  const std::size_t n = av.size();
#pragma omp parallel for schedule(static) if (n >= kParallelElems)
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(op, std::move(out), {a}, [ia, df](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const T* xv = t.value(ia).ptr();
    const T* yv = t.value(self).ptr();
    T* ga = t.grad(ia).ptr();
    const std::size_t m = g.size();
#pragma omp parallel for schedule(static) if (m >= kParallelElems)
    for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a, b);
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("add", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad(ib), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a, b);
  Tensor<T> out = a.value();
  const T* bv = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("sub", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
    if (t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a, b);
  Tensor<T> out = a.value();
  const T* bv = b.value().ptr();
  const std::size_t n = out.size();
  T* o = out.ptr();
#pragma omp parallel for simd schedule(static) if (n >= kParallelElems)
  for (std::size_t i = 0; i < n; ++i) o[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("mul", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      const Tensor<T>& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      const Tensor<T>& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary<T>(
      "scale", a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> arctan(Var<T> a) {
  return unary<T>(
      "arctan", a, [](T x) { return std::atan(x); }, [](T x, T) { return T(1) / (T(1) + x * x); });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope) {
  return unary<T>(
      "leaky_relu", a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary<T>(
      "square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = 0;
  for (T v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record("sum", Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self).item();
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> sum_per_sample(Var<T> a) {
  const Tensor<T>& av = a.value();
  if (av.ndim() < 1) throw DimensionError("sum_per_sample: tensor has no batch axis");
  const std::size_t batch = av.dim(0);
  const std::size_t per = batch ? av.size() / batch : 0;
  Tensor<T> out(Shape{batch});
  for (std::size_t n = 0; n < batch; ++n) {
    T s = 0;
    for (std::size_t i = 0; i < per; ++i) s += av[n * per + i];
    out[n] = s;
  }
  const std::size_t ia = a.id();
  return a.tape()->record("sum_per_sample", std::move(out), {a}, [ia, batch, per](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& ga = t.grad(ia);
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t i = 0; i < per; ++i) ga[n * per + i] += g[n];
  });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor<T> out(Shape{m, n});
  kernels::gemm(m, n, k, a.value().ptr(), false, b.value().ptr(), false, out.ptr(), T(0));
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", std::move(out), {a, b}, [ia, ib, m, n, k](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(ia)) kernels::gemm(m, k, n, g.ptr(), false, t.value(ib).ptr(), true, t.grad(ia).ptr(), T(1));
    if (t.requires_grad(ib)) kernels::gemm(k, n, m, t.value(ia).ptr(), true, g.ptr(), false, t.grad(ib).ptr(), T(1));
  });
}

template <typename T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias) {
  require_same_tape("affine", x, weight);
  require_same_tape("affine", x, bias);
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1] || bias.shape() != Shape{sw[0]}) {
    throw DimensionError("affine: input " + shape_str(sx) + " incompatible with weight " + shape_str(sw) +
                         " and bias " + shape_str(bias.shape()));
  }
  const std::size_t batch = sx[0], in = sx[1], out_dim = sw[0];
  Tensor<T> out(Shape{batch, out_dim});
  const T* bv = bias.value().ptr();
  for (std::size_t r = 0; r < batch; ++r) std::copy(bv, bv + out_dim, out.ptr() + r * out_dim);
  kernels::gemm(batch, out_dim, in, x.value().ptr(), false, weight.value().ptr(), true, out.ptr(), T(1));
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->record("affine", std::move(out), {x, weight, bias},
                          [ix, iw, ib, batch, in, out_dim](Tape<T>& t, std::size_t self) {
                            const Tensor<T>& g = t.grad(self);
                            if (t.requires_grad(ix))
                              kernels::gemm(batch, in, out_dim, g.ptr(), false, t.value(iw).ptr(), false,
                                            t.grad(ix).ptr(), T(1));
                            if (t.requires_grad(iw))
                              kernels::gemm(out_dim, in, batch, g.ptr(), true, t.value(ix).ptr(), false,
                                            t.grad(iw).ptr(), T(1));
                            if (t.requires_grad(ib)) {
                              Tensor<T>& gb = t.grad(ib);
                              for (std::size_t r = 0; r < batch; ++r)
                                for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
                            }
                          });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride, std::size_t pad) {
  require_same_tape("conv2d", x, weight);
  require_same_tape("conv2d", x, bias);
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() != 4 || sw.size() != 4 || sw[1] != sx[1] || sw[2] != sw[3] || bias.shape() != Shape{sw[0]}) {
    throw DimensionError("conv2d: input " + shape_str(sx) + " incompatible with weight " + shape_str(sw));
  }
  if (stride == 0 || sx[2] + 2 * pad < sw[2] || sx[3] + 2 * pad < sw[3]) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(sx));
  }
  kernels::ConvGeometry g{sx[0], sx[1], sx[2], sx[3], sw[0], sw[2], stride, pad};
  Tensor<T> out(Shape{g.batch, g.out_channels, g.out_height(), g.out_width()});
  kernels::conv2d_forward(g, x.value().ptr(), weight.value().ptr(), bias.value().ptr(), out.ptr());
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->record("conv2d", std::move(out), {x, weight, bias}, [ix, iw, ib, g](Tape<T>& t, std::size_t self) {
    T* dx = t.requires_grad(ix) ? t.grad(ix).ptr() : nullptr;
    T* dw = t.requires_grad(iw) ? t.grad(iw).ptr() : nullptr;
    T* db = t.requires_grad(ib) ? t.grad(ib).ptr() : nullptr;
    kernels::conv2d_backward(g, t.value(ix).ptr(), t.value(iw).ptr(), t.grad(self).ptr(), dx, dw, db);
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (parts.size() == 1) return parts[0];
  Shape s = parts[0].shape();
  const ChannelView v0 = channel_view(s, "concat");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> channels;
  std::size_t total = 0;
  for (const Var<T>& p : parts) {
    require_same_tape("concat", parts[0], p);
    Shape ps = p.shape();
    const ChannelView v = channel_view(ps, "concat");
    ps[1] = s[1];
    if (ps != s) throw DimensionError("concat: non-channel extents differ, " + shape_str(p.shape()) + " vs " + shape_str(s));
    ids.push_back(p.id());
    channels.push_back(v.channels);
    total += v.channels;
  }
  s[1] = total;
  Tensor<T> out(s);
  const std::size_t batch = v0.batch, pixels = v0.pixels;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().ptr();
    const std::size_t block = channels[k] * pixels;
    for (std::size_t n = 0; n < batch; ++n)
      std::copy(src + n * block, src + (n + 1) * block, out.ptr() + (n * total + offset) * pixels);
    offset += channels[k];
  }
  return parts[0].tape()->record(
      "concat", std::move(out), parts, [ids, channels, batch, pixels, total](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t block = channels[k] * pixels;
          if (t.requires_grad(ids[k])) {
            T* dst = t.grad(ids[k]).ptr();
            for (std::size_t n = 0; n < batch; ++n) {
              const T* src = g.ptr() + (n * total + off) * pixels;
              for (std::size_t i = 0; i < block; ++i) dst[n * block + i] += src[i];
            }
          }
          off += channels[k];
        }
      });
}

template <typename T>
Var<T> concat(Var<T> a, Var<T> b) {
  const Var<T> parts[2] = {a, b};
  return concat<T>(std::span<const Var<T>>(parts, 2));
}

template <typename T>
Var<T> slice(Var<T> a, std::size_t begin, std::size_t end) {
  const ChannelView v = channel_view(a.shape(), "slice");
  if (begin >= end || end > v.channels) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_str(a.shape()));
  }
  Shape s = a.shape();
  s[1] = end - begin;
  Tensor<T> out(s);
  const std::size_t width = (end - begin) * v.pixels;
  const T* src = a.value().ptr();
  for (std::size_t n = 0; n < v.batch; ++n)
    std::copy(src + (n * v.channels + begin) * v.pixels, src + (n * v.channels + begin) * v.pixels + width,
              out.ptr() + n * width);
  const std::size_t ia = a.id();
  return a.tape()->record("slice", std::move(out), {a}, [ia, v, begin, width](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    T* dst = t.grad(ia).ptr();
    for (std::size_t n = 0; n < v.batch; ++n) {
      T* d = dst + (n * v.channels + begin) * v.pixels;
      for (std::size_t i = 0; i < width; ++i) d[i] += g[n * width + i];
    }
  });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape()->record("reshape", std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    accumulate(t.grad(ia), t.grad(self));
  });
}

namespace {

template <typename T>
using PlaneKernel = void (*)(std::size_t, std::size_t, std::size_t, std::size_t, const T*, T*);

// Shared plumbing for the 2x2 reshaping transforms. down/up are mutually
// inverse and orthogonal, so the adjoint of each is the other.
template <typename T>
Var<T> reshape2x2(const char* op, Var<T> a, bool downsample, PlaneKernel<T> down, PlaneKernel<T> up) {
  const Shape& s = a.shape();
  if (s.size() != 4) throw DimensionError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(s));
  std::size_t n = s[0], c, h, w;
  Shape out_shape;
  if (downsample) {
    c = s[1];
    h = s[2];
    w = s[3];
    if (h % 2 || w % 2) throw DimensionError(std::string(op) + ": odd spatial extent " + shape_str(s));
    out_shape = {n, 4 * c, h / 2, w / 2};
  } else {
    if (s[1] % 4) throw DimensionError(std::string(op) + ": channel count not divisible by 4 in " + shape_str(s));
    c = s[1] / 4;
    h = 2 * s[2];
    w = 2 * s[3];
    out_shape = {n, c, h, w};
  }
  Tensor<T> out(out_shape);
  (downsample ? down : up)(n, c, h, w, a.value().ptr(), out.ptr());
  const std::size_t ia = a.id();
  PlaneKernel<T> adjoint = downsample ? up : down;
  return a.tape()->record(op, std::move(out), {a}, [ia, n, c, h, w, adjoint](Tape<T>& t, std::size_t self) {
    Tensor<T> tmp(t.value(ia).shape());
    adjoint(n, c, h, w, t.grad(self).ptr(), tmp.ptr());
    accumulate(t.grad(ia), tmp);
  });
}

}  // namespace

template <typename T>
Var<T> haar(Var<T> a) {
  return reshape2x2<T>("haar", a, true, &kernels::haar_forward<T>, &kernels::haar_inverse<T>);
}

template <typename T>
Var<T> haar_inverse(Var<T> a) {
  return reshape2x2<T>("haar_inverse", a, false, &kernels::haar_forward<T>, &kernels::haar_inverse<T>);
}

template <typename T>
Var<T> squeeze2x2(Var<T> a) {
  return reshape2x2<T>("squeeze2x2", a, true, &kernels::squeeze_forward<T>, &kernels::squeeze_inverse<T>);
}

template <typename T>
Var<T> unsqueeze2x2(Var<T> a) {
  return reshape2x2<T>("unsqueeze2x2", a, false, &kernels::squeeze_forward<T>, &kernels::squeeze_inverse<T>);
}

template <typename T>
Var<T> mix_channels(Var<T> a, const Tensor<T>& q, bool transpose) {
  const ChannelView v = channel_view(a.shape(), "mix_channels");
  if (q.shape() != Shape{v.channels, v.channels}) {
    throw DimensionError("mix_channels: matrix " + shape_str(q.shape()) + " does not match " + std::to_string(v.channels) +
                         " channels");
  }
  Tensor<T> out(a.shape());
  kernels::mix_channels(v.batch, v.channels, v.pixels, q.ptr(), transpose, a.value().ptr(), out.ptr());
  const std::size_t ia = a.id();
  return a.tape()->record("mix_channels", std::move(out), {a}, [ia, v, q, transpose](Tape<T>& t, std::size_t self) {
    Tensor<T> tmp(t.value(ia).shape());
    kernels::mix_channels(v.batch, v.channels, v.pixels, q.ptr(), !transpose, t.grad(self).ptr(), tmp.ptr());
    accumulate(t.grad(ia), tmp);
  });
}

template <typename T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, T eps, Tensor<T>* batch_mean, Tensor<T>* batch_var) {
  require_same_tape("batch_norm", x, gamma);
  require_same_tape("batch_norm", x, beta);
  const ChannelView v = channel_view(x.shape(), "batch_norm");
  if (gamma.shape() != Shape{v.channels} || beta.shape() != Shape{v.channels}) {
    throw DimensionError("batch_norm: affine parameters do not match " + std::to_string(v.channels) + " channels");
  }
  const std::size_t count = v.batch * v.pixels;
  const Tensor<T>& xv = x.value();
  Tensor<T> mu(Shape{v.channels});
  Tensor<T> var(Shape{v.channels});
  for (std::size_t c = 0; c < v.channels; ++c) {
    T s = 0;
    for (std::size_t n = 0; n < v.batch; ++n)
      for (std::size_t p = 0; p < v.pixels; ++p) s += xv[(n * v.channels + c) * v.pixels + p];
    mu[c] = s / static_cast<T>(count);
    T ss = 0;
    for (std::size_t n = 0; n < v.batch; ++n)
      for (std::size_t p = 0; p < v.pixels; ++p) {
        const T d = xv[(n * v.channels + c) * v.pixels + p] - mu[c];
        ss += d * d;
      }
    var[c] = ss / static_cast<T>(count);
  }
  Tensor<T> xhat(xv.shape());
  Tensor<T> out(xv.shape());
  Tensor<T> inv_std(Shape{v.channels});
  for (std::size_t c = 0; c < v.channels; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + eps);
  const T* gm = gamma.value().ptr();
  const T* bt = beta.value().ptr();
  for (std::size_t n = 0; n < v.batch; ++n)
    for (std::size_t c = 0; c < v.channels; ++c)
      for (std::size_t p = 0; p < v.pixels; ++p) {
        const std::size_t i = (n * v.channels + c) * v.pixels + p;
        xhat[i] = (xv[i] - mu[c]) * inv_std[c];
        out[i] = gm[c] * xhat[i] + bt[c];
      }
  if (batch_mean) *batch_mean = mu;
  if (batch_var) *batch_var = var;
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [ix, ig, ib, v, count, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T> dg(Shape{v.channels});
        Tensor<T> db(Shape{v.channels});
        for (std::size_t n = 0; n < v.batch; ++n)
          for (std::size_t c = 0; c < v.channels; ++c)
            for (std::size_t p = 0; p < v.pixels; ++p) {
              const std::size_t i = (n * v.channels + c) * v.pixels + p;
              dg[c] += g[i] * xhat[i];
              db[c] += g[i];
            }
        if (t.requires_grad(ig)) accumulate(t.grad(ig), dg);
        if (t.requires_grad(ib)) accumulate(t.grad(ib), db);
        if (t.requires_grad(ix)) {
          const T* gm = t.value(ig).ptr();
          Tensor<T>& gx = t.grad(ix);
          const T inv_count = T(1) / static_cast<T>(count);
          for (std::size_t n = 0; n < v.batch; ++n)
            for (std::size_t c = 0; c < v.channels; ++c)
              for (std::size_t p = 0; p < v.pixels; ++p) {
                const std::size_t i = (n * v.channels + c) * v.pixels + p;
                gx[i] += gm[c] * inv_std[c] * (g[i] - inv_count * db[c] - xhat[i] * inv_count * dg[c]);
              }
        }
      });
}

template <typename T>
Var<T> batch_norm_eval(Var<T> x, Var<T> gamma, Var<T> beta, const Tensor<T>& mean, const Tensor<T>& var, T eps) {
  require_same_tape("batch_norm", x, gamma);
  require_same_tape("batch_norm", x, beta);
  const ChannelView v = channel_view(x.shape(), "batch_norm");
  if (gamma.shape() != Shape{v.channels} || mean.shape() != Shape{v.channels} || var.shape() != Shape{v.channels}) {
    throw DimensionError("batch_norm: statistics do not match " + std::to_string(v.channels) + " channels");
  }
  const Tensor<T>& xv = x.value();
  Tensor<T> xhat(xv.shape());
  Tensor<T> out(xv.shape());
  Tensor<T> inv_std(Shape{v.channels});
  for (std::size_t c = 0; c < v.channels; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + eps);
  const T* gm = gamma.value().ptr();
  const T* bt = beta.value().ptr();
  for (std::size_t n = 0; n < v.batch; ++n)
    for (std::size_t c = 0; c < v.channels; ++c)
      for (std::size_t p = 0; p < v.pixels; ++p) {
        const std::size_t i = (n * v.channels + c) * v.pixels + p;
        xhat[i] = (xv[i] - mean[c]) * inv_std[c];
        out[i] = gm[c] * xhat[i] + bt[c];
      }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [ix, ig, ib, v, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const T* gm = t.value(ig).ptr();
        for (std::size_t n = 0; n < v.batch; ++n)
          for (std::size_t c = 0; c < v.channels; ++c)
            for (std::size_t p = 0; p < v.pixels; ++p) {
              const std::size_t i = (n * v.channels + c) * v.pixels + p;
              if (t.requires_grad(ig)) t.grad(ig)[c] += g[i] * xhat[i];
              if (t.requires_grad(ib)) t.grad(ib)[c] += g[i];
              if (t.requires_grad(ix)) t.grad(ix)[i] += g[i] * gm[c] * inv_std[c];
            }
      });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size()) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_str(s) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t batch = s[0], classes = s[1];
  const Tensor<T>& z = logits.value();
  Tensor<T> prob(s);
  T loss = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) throw DimensionError("label out of range");
    T mx = z[n * classes];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, z[n * classes + k]);
    T se = 0;
    for (std::size_t k = 0; k < classes; ++k) se += std::exp(z[n * classes + k] - mx);
    for (std::size_t k = 0; k < classes; ++k) prob[n * classes + k] = std::exp(z[n * classes + k] - mx) / se;
    loss += -(z[n * classes + labels[n]] - mx - std::log(se));
  }
  loss /= static_cast<T>(batch);
  std::vector<int> lab(labels.begin(), labels.end());
  const std::size_t il = logits.id();
  return logits.tape()->record(
      "softmax_cross_entropy", Tensor<T>::scalar(loss), {logits},
      [il, batch, classes, lab = std::move(lab), prob = std::move(prob)](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self).item() / static_cast<T>(batch);
        Tensor<T>& gz = t.grad(il);
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t k = 0; k < classes; ++k)
            gz[n * classes + k] += g * (prob[n * classes + k] - (static_cast<int>(k) == lab[n] ? T(1) : T(0)));
      });
}

#define CINN_INSTANTIATE_OPS(T)                                                                              \
  template Var<T> add<T>(Var<T>, Var<T>);                                                                    \
  template Var<T> sub<T>(Var<T>, Var<T>);                                                                    \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                                    \
  template Var<T> scale<T>(Var<T>, T);                                                                       \
  template Var<T> exp<T>(Var<T>);                                                                            \
  template Var<T> arctan<T>(Var<T>);                                                                         \
  template Var<T> leaky_relu<T>(Var<T>, T);                                                                  \
  template Var<T> square<T>(Var<T>);                                                                         \
  template Var<T> sum<T>(Var<T>);                                                                            \
  template Var<T> mean<T>(Var<T>);                                                                           \
  template Var<T> sum_per_sample<T>(Var<T>);                                                                 \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                                                 \
  template Var<T> affine<T>(Var<T>, Var<T>, Var<T>);                                                         \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);                               \
  template Var<T> concat<T>(std::span<const Var<T>>);                                                        \
  template Var<T> concat<T>(Var<T>, Var<T>);                                                                 \
  template Var<T> slice<T>(Var<T>, std::size_t, std::size_t);                                                \
  template Var<T> reshape<T>(Var<T>, Shape);                                                                 \
  template Var<T> haar<T>(Var<T>);                                                                           \
  template Var<T> haar_inverse<T>(Var<T>);                                                                   \
  template Var<T> squeeze2x2<T>(Var<T>);                                                                     \
  template Var<T> unsqueeze2x2<T>(Var<T>);                                                                   \
  template Var<T> mix_channels<T>(Var<T>, const Tensor<T>&, bool);                                           \
  template Var<T> batch_norm_train<T>(Var<T>, Var<T>, Var<T>, T, Tensor<T>*, Tensor<T>*);                    \
  template Var<T> batch_norm_eval<T>(Var<T>, Var<T>, Var<T>, const Tensor<T>&, const Tensor<T>&, T);         \
  template Var<T> softmax_cross_entropy<T>(Var<T>, std::span<const int>);

CINN_INSTANTIATE_OPS(float)
CINN_INSTANTIATE_OPS(double)

}  // namespace cinn::ops
