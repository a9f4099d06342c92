// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cinn/datasets/datasets.hpp"
#include "doctest.h"

using namespace cinn;
using namespace cinn::datasets;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

struct IdxFiles {
  fs::path dir, images, labels;
};

// n images of 28x28 where image i has every pixel equal to (i * 51) % 256.
IdxFiles make_idx(const std::string& tag, std::uint32_t n, std::uint32_t n_labels = 0,
                  std::uint32_t image_magic = 2051, std::uint32_t label_magic = 2049, std::size_t drop = 0) {
  IdxFiles f;
  f.dir = fs::temp_directory_path() / ("cinn_idx_" + tag);
  fs::create_directories(f.dir);
  f.images = f.dir / "images";
  f.labels = f.dir / "labels";
  std::vector<unsigned char> img, lab;
  put_be32(img, image_magic);
  put_be32(img, n);
  put_be32(img, 28);
  put_be32(img, 28);
  for (std::uint32_t i = 0; i < n; ++i) img.insert(img.end(), 28 * 28, static_cast<unsigned char>((i * 51) % 256));
  img.resize(img.size() - drop);
  put_be32(lab, label_magic);
  put_be32(lab, n_labels ? n_labels : n);
  for (std::uint32_t i = 0; i < (n_labels ? n_labels : n); ++i) lab.push_back(static_cast<unsigned char>(i % 10));
  write_bytes(f.images, img);
  write_bytes(f.labels, lab);
  return f;
}

// Direct bivariate normal density, written out without any matrix library.
double bivariate_log_pdf(double x, double y, double mx, double my, double sxx, double sxy, double syy) {
  const double det = sxx * syy - sxy * sxy;
  const double dx = x - mx, dy = y - my;
  const double q = (syy * dx * dx - 2 * sxy * dx * dy + sxx * dy * dy) / det;
  return -0.5 * q - std::log(2 * std::numbers::pi) - 0.5 * std::log(det);
}

}  // namespace

TEST_CASE("MNIST IDX files load with the documented scaling") {
  auto f = make_idx("ok", 6);
  auto batch = load_mnist_idx(f.images.string(), f.labels.string());
  CHECK(batch.images.shape() == Shape{6, 1, 28, 28});
  CHECK(batch.labels == std::vector<int>{0, 1, 2, 3, 4, 5});
  // Image 5 has raw value 255: 1.0 before normalization, 0.5 after.
  const Tensor<float> raw = batch.norm.denormalize(batch.images);
  CHECK(raw[5 * 784] == doctest::Approx(1.0));
  CHECK(batch.images[5 * 784] == doctest::Approx(0.5));
  CHECK(batch.images[0] == doctest::Approx(-0.5));
  CHECK(raw[1 * 784] == doctest::Approx(51.0 / 255.0));
  CHECK(load_mnist_idx(f.images.string(), f.labels.string(), 4).labels.size() == 4);
}

TEST_CASE("MNIST loader rejects malformed files") {
  auto ok = make_idx("swap", 3);
  CHECK_THROWS_AS(load_mnist_idx(ok.images.string(), ok.images.string()), DataError);  // images as labels
  CHECK_THROWS_AS(load_mnist_idx(ok.labels.string(), ok.labels.string()), DataError);
  auto truncated = make_idx("trunc", 3, 0, 2051, 2049, 100);
  CHECK_THROWS_AS(load_mnist_idx(truncated.images.string(), truncated.labels.string()), DataError);
  auto mismatch = make_idx("count", 3, 4);
  CHECK_THROWS_AS(load_mnist_idx(mismatch.images.string(), mismatch.labels.string()), DataError);
  CHECK_THROWS_AS(load_mnist_idx("/nonexistent/images", "/nonexistent/labels"), DataError);
}

TEST_CASE("normalization round trip") {
  Normalization n{{0.5, -2.0}, {1.0, 4.0}};
  Tensor<double> x({3, 2, 2});
  Rng rng(1);
  fill_uniform(x, rng, -3, 3);
  CHECK(max_abs_diff(n.denormalize(n.normalize(x)), x) <= 1e-6);
  Tensor<double> y = n.normalize(x);
  CHECK(y[2] == doctest::Approx((x[2] + 2.0) / 4.0));
  nlohmann::json j = n;
  CHECK(j.get<Normalization>() == n);
  CHECK_THROWS_AS(n.normalize(Tensor<double>({2, 3, 1})), DimensionError);
}

TEST_CASE("synthetic log-density matches the closed form") {
  SyntheticCondDensity std2;
  std2.dim = 2;
  std2.conditions = {{{1.0, {0, 0}, {1, 0, 0, 1}}}};
  std::vector<double> origin{0, 0};
  CHECK(std2.log_prob(origin, 0) == doctest::Approx(-std::log(2 * std::numbers::pi)).epsilon(1e-12));

  const auto d = gaussian_task();
  const double pts[10][2] = {{0, 0}, {2, 0}, {-2, 0.5}, {1, 1}, {0, 2}, {0.3, -2.2}, {-1, -1}, {3, 3}, {-4, 1}, {0.5, 1.5}};
  const double params[4][5] = {{2, 0, 0.25, 0, 1}, {-2, 0, 1, 0.6, 1}, {0, 2, 0.5, 0, 0.5}, {0, -2, 0.3, -0.2, 0.6}};
  for (int c = 0; c < 4; ++c)
    for (const auto& p : pts) {
      std::vector<double> x{p[0], p[1]};
      const auto& q = params[c];
      CHECK(d.log_prob(x, c) == doctest::Approx(bivariate_log_pdf(p[0], p[1], q[0], q[1], q[2], q[3], q[4])).epsilon(1e-10));
    }
  // Entropy: 1/2 log((2 pi e)^2 det).
  CHECK(d.entropy(1) == doctest::Approx(std::log(2 * std::numbers::pi * std::numbers::e) + 0.5 * std::log(0.64)));
  CHECK_THROWS_AS(bimodal_task().entropy(0), ContractError);
}

TEST_CASE("synthetic samples have the right means and carry exact log p") {
  SyntheticCondDensity d;
  d.dim = 2;
  d.conditions = {{{1.0, {1.0, -2.0}, {1, 0, 0, 1}}}, {{1.0, {-3.0, 0.5}, {1, 0, 0, 1}}}};
  const std::size_t n = 100000;
  for (int c = 0; c < 2; ++c) {
    auto s = synth_conditional(d, n, 7 + c, c);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += s.x[2 * i] / n;
      my += s.x[2 * i + 1] / n;
    }
    const double bound = 3.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mx - d.conditions[c][0].mean[0]) < bound);
    CHECK(std::abs(my - d.conditions[c][0].mean[1]) < bound);
    const auto& m = d.conditions[c][0].mean;
    CHECK(s.log_p[3] == doctest::Approx(bivariate_log_pdf(s.x[6], s.x[7], m[0], m[1], 1, 0, 1)).epsilon(1e-12));
  }
  auto a = synth_conditional(d, 50, 3), b = synth_conditional(d, 50, 3);
  CHECK(a.x == b.x);
  CHECK(a.labels == b.labels);
}

TEST_CASE("bimodal condition reproduces its mixture weights") {
  SyntheticCondDensity d;
  d.dim = 2;
  d.conditions = {{{0.5, {-3, 0}, {1, 0, 0, 1}}, {0.5, {3, 0}, {1, 0, 0, 1}}}};
  auto s = synth_conditional(d, 10000, 11, 0);
  double right = 0;
  for (std::size_t i = 0; i < 10000; ++i) right += s.x[2 * i] > 0 ? 1 : 0;
  CHECK(std::abs(right / 10000 - 0.5) < 0.03);
  CHECK_THROWS_AS(SyntheticCondDensity({2, {{{0.4, {0, 0}, {1, 0, 0, 1}}}}}).validate(), ConfigError);
  CHECK_THROWS_AS(SyntheticCondDensity({2, {{{1.0, {0, 0}, {1, 2, 2, 1}}}}}).validate(), ConfigError);
}

TEST_CASE("Lab conversion reference points and round trip") {
  const Color black = rgb_to_lab({0, 0, 0});
  CHECK(black[0] == doctest::Approx(0).epsilon(1e-12));
  CHECK(std::abs(black[1]) < 1e-9);
  CHECK(std::abs(black[2]) < 1e-9);
  const Color white = rgb_to_lab({1, 1, 1});
  CHECK(white[0] == doctest::Approx(100).epsilon(1e-6));
  CHECK(std::abs(white[1]) < 0.01);
  CHECK(std::abs(white[2]) < 0.01);
  // Pure sRGB red has a well-known Lab value (53.24, 80.09, 67.20).
  const Color red = rgb_to_lab({1, 0, 0});
  CHECK(red[0] == doctest::Approx(53.24).epsilon(1e-3));
  CHECK(red[1] == doctest::Approx(80.09).epsilon(1e-3));
  CHECK(red[2] == doctest::Approx(67.20).epsilon(1e-3));

  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int i = 0; i < 5000; ++i) {
    const Color rgb{u(rng), u(rng), u(rng)};
    bool clipped = true;
    const Color back = lab_to_rgb(rgb_to_lab(rgb), &clipped);
    CHECK_FALSE(clipped);
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back[c] - rgb[c]));
  }
  CHECK(worst <= 1e-3);
  bool clipped = false;
  const Color out = lab_to_rgb({50, 120, -120}, &clipped);
  CHECK(clipped);
  for (double c : out) CHECK((c >= 0 && c <= 1));
}

TEST_CASE("palette colors are in gamut and share luminance per class") {
  for (int c = 0; c < kShapeClasses; ++c)
    for (int m = 0; m < kPaletteModes; ++m) {
      bool clipped = true;
      const Color lab = palette_lab(c, m);
      const Color back = rgb_to_lab(lab_to_rgb(lab, &clipped));
      CHECK_FALSE(clipped);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(back[k] - lab[k]) < 1e-3);
      CHECK(lab[0] == palette_lab(c, 0)[0]);
    }
}

TEST_CASE("colored shapes: shapes, determinism, gamut") {
  auto a = synth_colored_shapes(8, 16, 42), b = synth_colored_shapes(8, 16, 42);
  CHECK(a.L.shape() == Shape{8, 1, 32, 32});
  CHECK(a.ab.shape() == Shape{8, 2, 16, 16});
  CHECK(a.shape_mask.shape() == Shape{8, 1, 16, 16});
  CHECK(a.L == b.L);
  CHECK(a.ab == b.ab);
  CHECK_FALSE(synth_colored_shapes(8, 16, 43).L == a.L);
  CHECK_THROWS_AS(synth_colored_shapes(1, 15, 0), ContractError);

  // Every ab value maps back to an in-gamut RGB for its L block.
  const Tensor<float> L = a.l_norm.denormalize(a.L), ab = a.ab_norm.denormalize(a.ab);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        // Use the mean L of the 2x2 block; fully covered blocks are uniform.
        double l = 0;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) l += L[(i * 32 + 2 * y + dy) * 32 + 2 * x + dx] / 4;
        const double av = ab[((i * 2) * 16 + y) * 16 + x], bv = ab[((i * 2 + 1) * 16 + y) * 16 + x];
        CHECK(std::abs(av) <= 110);
        CHECK(std::abs(bv) <= 110);
        if (a.shape_mask[(i * 16 + y) * 16 + x] == 0.0f) {
          CHECK(std::abs(av) < 1e-3);
          CHECK(std::abs(bv) < 1e-3);
          CHECK(l == doctest::Approx(background_lab()[0]).epsilon(1e-4));
        }
      }
}

TEST_CASE("regenerating colors varies shape pixels and never the background") {
  Rng rng(9);
  const Scene base = random_scene(rng);
  std::vector<Scene> variants;
  for (int k = 0; k < 32; ++k) variants.push_back(recolor(base, rng));
  auto batch = render_scenes(variants, 16);
  const std::size_t plane = 16 * 16;
  bool shape_varies = false;
  for (std::size_t p = 0; p < plane; ++p) {
    double mean = 0, var = 0;
    for (std::size_t k = 0; k < 32; ++k) mean += batch.ab[(k * 2) * plane + p] / 32;
    for (std::size_t k = 0; k < 32; ++k) var += std::pow(batch.ab[(k * 2) * plane + p] - mean, 2) / 32;
    const bool is_shape = batch.shape_mask[p] != 0.0f;
    if (!is_shape) CHECK(var == 0.0);
    if (is_shape && var > 0) shape_varies = true;
    // Geometry is shared by every variant.
    for (std::size_t k = 1; k < 32; ++k) CHECK(batch.shape_mask[k * plane + p] == batch.shape_mask[p]);
  }
  CHECK(shape_varies);
  // L never depends on the palette mode.
  for (std::size_t k = 1; k < 32; ++k)
    for (std::size_t p = 0; p < 4 * plane; ++p)
      CHECK(batch.L[k * 4 * plane + p] == doctest::Approx(batch.L[p]).epsilon(1e-5));
}

TEST_CASE("exports write PNG files and a manifest") {
  const fs::path dir = fs::temp_directory_path() / "cinn_export_test";
  fs::remove_all(dir);
  auto shapes = synth_colored_shapes(3, 8, 1);
  export_colorization((dir / "shapes").string(), shapes);
  CHECK(fs::exists(dir / "shapes" / "img_2.png"));
  std::ifstream m(dir / "shapes" / "manifest.csv");
  std::string header, line;
  std::getline(m, header);
  CHECK(header == "path,seed,item");
  std::getline(m, line);
  CHECK(line == "img_0.png,1,0");

  auto f = make_idx("export", 2);
  export_mnist((dir / "mnist").string(), load_mnist_idx(f.images.string(), f.labels.string()));
  std::ifstream png(dir / "mnist" / "img_1.png", std::ios::binary);
  unsigned char sig[8] = {};
  png.read(reinterpret_cast<char*>(sig), 8);
  CHECK(sig[1] == 'P');
  CHECK(sig[2] == 'N');
  CHECK(sig[3] == 'G');
  CHECK_THROWS_AS(write_png((dir / "x.png").string(), std::vector<std::uint8_t>(5), 2, 2, 1), DimensionError);
}
