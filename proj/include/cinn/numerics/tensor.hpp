// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cinn/errors.hpp"

namespace cinn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// Dense row-major n-dimensional array. A scalar has the empty shape and one
// element.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T(0)) {}
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_str(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("max_abs_diff shape mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T squared_norm(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v * v;
  return s;
}

// Rows [begin, end) along axis 0.
template <typename T>
Tensor<T> take_rows(const Tensor<T>& t, std::size_t begin, std::size_t end) {
  if (t.ndim() == 0 || begin > end || end > t.dim(0)) throw DimensionError("take_rows out of range");
  Shape shape = t.shape();
  shape[0] = end - begin;
  const std::size_t row = t.dim(0) ? t.size() / t.dim(0) : 0;
  return Tensor<T>(shape, std::vector<T>(t.ptr() + begin * row, t.ptr() + end * row));
}

// Rows at the given indices along axis 0.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& t, std::span<const std::size_t> idx) {
  if (t.ndim() == 0) throw DimensionError("gather_rows on a scalar");
  Shape shape = t.shape();
  shape[0] = idx.size();
  const std::size_t row = t.dim(0) ? t.size() / t.dim(0) : 0;
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= t.dim(0)) throw DimensionError("gather_rows index out of range");
    std::copy(t.ptr() + idx[i] * row, t.ptr() + (idx[i] + 1) * row, out.ptr() + i * row);
  }
  return out;
}

}  // namespace cinn
