// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "cinn/datasets/datasets.hpp"

namespace cinn::datasets {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

void write_png(const std::string& path, std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height,
               int channels) {
  if (channels != 1 && channels != 3) throw ContractError("PNG writer supports 1 or 3 channels");
  if (pixels.size() != width * height * static_cast<std::size_t>(channels))
    throw DimensionError("PNG pixel buffer does not match " + std::to_string(width) + "x" + std::to_string(height));
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  // libpng reports errors by longjmp; nothing with a destructor lives between
  // here and the end of the write.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_gray_png(const std::string& path, std::span<const float> plane, std::size_t width, std::size_t height,
                    double lo, double hi) {
  if (!(hi > lo)) throw ContractError("gray PNG range must satisfy hi > lo");
  std::vector<std::uint8_t> px(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) px[i] = to_byte((plane[i] - lo) / (hi - lo));
  write_png(path, px, width, height, 1);
}

void write_lab_png(const std::string& path, std::span<const float> l_plane, std::span<const float> a_plane,
                   std::span<const float> b_plane, std::size_t width, std::size_t height, std::size_t ab_width,
                   std::size_t ab_height) {
  if (l_plane.size() != width * height || a_plane.size() != ab_width * ab_height ||
      b_plane.size() != ab_width * ab_height || ab_width == 0 || ab_height == 0)
    throw DimensionError("Lab planes do not match the declared sizes");
  std::vector<std::uint8_t> px(width * height * 3);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t k = (y * ab_height / height) * ab_width + x * ab_width / width;
      const Color rgb = lab_to_rgb({l_plane[y * width + x], a_plane[k], b_plane[k]});
      for (int c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = to_byte(rgb[c]);
    }
  write_png(path, px, width, height, 3);
}

void write_f32(const std::string& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("short write to " + path);
}

void export_mnist(const std::string& dir, const LabeledImageBatch& batch) {
  make_dir(dir);
  const Tensor<float> raw = batch.norm.denormalize(batch.images);
  const std::size_t n = raw.dim(0), h = raw.dim(2), w = raw.dim(3);
  std::ofstream manifest(dir + "/manifest.csv");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  manifest << "path,label\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "img_" + std::to_string(i) + ".png";
    write_gray_png(dir + "/" + name, std::span<const float>(raw.ptr() + i * h * w, h * w), w, h, 0.0, 1.0);
    manifest << name << ',' << batch.labels.at(i) << '\n';
  }
}

void export_colorization(const std::string& dir, const ColorizationBatch& batch) {
  make_dir(dir);
  const Tensor<float> L = batch.l_norm.denormalize(batch.L);
  const Tensor<float> ab = batch.ab_norm.denormalize(batch.ab);
  const std::size_t n = L.dim(0), hs = L.dim(2), s = ab.dim(2);
  std::ofstream manifest(dir + "/manifest.csv");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  manifest << "path,seed,item\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "img_" + std::to_string(i) + ".png";
    write_lab_png(dir + "/" + name, std::span<const float>(L.ptr() + i * hs * hs, hs * hs),
                  std::span<const float>(ab.ptr() + (i * 2) * s * s, s * s),
                  std::span<const float>(ab.ptr() + (i * 2 + 1) * s * s, s * s), hs, hs, s, s);
    manifest << name << ',' << (i < batch.seeds.size() ? batch.seeds[i] : 0) << ','
             << (i < batch.items.size() ? batch.items[i] : i) << '\n';
  }
}

}  // namespace cinn::datasets
