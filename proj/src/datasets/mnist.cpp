// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>

#include "cinn/datasets/datasets.hpp"

namespace cinn::datasets {

namespace {

double pick(const std::vector<double>& v, std::size_t c, const char* what) {
  if (v.size() == 1) return v[0];
  if (c >= v.size()) throw DimensionError(std::string("normalization has no ") + what + " for channel " + std::to_string(c));
  return v[c];
}

template <typename T, typename F>
Tensor<T> per_channel(const Tensor<T>& x, F&& f) {
  if (x.ndim() < 2) throw DimensionError("normalization expects [N, C, ...], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), ch = x.dim(1), inner = x.size() / (n * ch);
  Tensor<T> out = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      T* p = out.ptr() + (i * ch + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) p[k] = static_cast<T>(f(static_cast<double>(p[k]), c));
    }
  return out;
}

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) throw DataError(path + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

}  // namespace

template <typename T>
Tensor<T> Normalization::normalize(const Tensor<T>& raw) const {
  return per_channel(raw, [&](double v, std::size_t c) { return (v - pick(offset, c, "offset")) / pick(scale, c, "scale"); });
}

template <typename T>
Tensor<T> Normalization::denormalize(const Tensor<T>& x) const {
  return per_channel(x, [&](double v, std::size_t c) { return v * pick(scale, c, "scale") + pick(offset, c, "offset"); });
}

template Tensor<float> Normalization::normalize(const Tensor<float>&) const;
template Tensor<double> Normalization::normalize(const Tensor<double>&) const;
template Tensor<float> Normalization::denormalize(const Tensor<float>&) const;
template Tensor<double> Normalization::denormalize(const Tensor<double>&) const;

void to_json(nlohmann::json& j, const Normalization& n) { j = {{"offset", n.offset}, {"scale", n.scale}}; }

void from_json(const nlohmann::json& j, Normalization& n) {
  j.at("offset").get_to(n.offset);
  j.at("scale").get_to(n.scale);
}

LabeledImageBatch load_mnist_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);
  if (be32(img, 0, images_path) != 2051) throw DataError(images_path + ": not an IDX image file (bad magic)");
  if (be32(lab, 0, labels_path) != 2049) throw DataError(labels_path + ": not an IDX label file (bad magic)");
  const std::size_t n = be32(img, 4, images_path), rows = be32(img, 8, images_path), cols = be32(img, 12, images_path);
  const std::size_t n_labels = be32(lab, 4, labels_path);
  if (n != n_labels)
    throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " + std::to_string(n_labels));
  if (img.size() < 16 + n * rows * cols) throw DataError(images_path + ": truncated pixel data");
  if (lab.size() < 8 + n) throw DataError(labels_path + ": truncated label data");

  const std::size_t keep = limit > 0 ? std::min(limit, n) : n;
  LabeledImageBatch out;
  out.norm = {{0.5}, {1.0}};
  Tensor<float> raw({keep, 1, rows, cols});
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(img[16 + i]) / 255.0f;
  out.images = out.norm.normalize(raw);
  out.labels.resize(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.labels[i] = lab[8 + i];
    if (out.labels[i] > 9) throw DataError(labels_path + ": label out of range at item " + std::to_string(i));
  }
  return out;
}

}  // namespace cinn::datasets
