// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Data sources: MNIST IDX files, synthetic conditional Gaussian mixtures with
// exact densities, and a procedural colored-shapes colorization corpus.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cinn/numerics/random.hpp"
#include "json.hpp"

namespace cinn::datasets {

// Per-channel affine map: normalized = (raw - offset) / scale.
struct Normalization {
  std::vector<double> offset;
  std::vector<double> scale;

  // Channel axis is 1 ([N, C, ...]); a single entry applies to every channel.
  template <typename T>
  Tensor<T> normalize(const Tensor<T>& raw) const;
  template <typename T>
  Tensor<T> denormalize(const Tensor<T>& x) const;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

void to_json(nlohmann::json& j, const Normalization& n);
void from_json(const nlohmann::json& j, Normalization& n);

// ---- MNIST -----------------------------------------------------------------

struct LabeledImageBatch {
  Tensor<float> images;  // [N, 1, 28, 28], normalized
  std::vector<int> labels;
  Normalization norm;    // raw pixels are in [0, 1]
};

// Reads IDX image (magic 2051) and label (magic 2049) files. Pixels are scaled
// to [0, 1] and shifted by -0.5. limit > 0 keeps only the first `limit` items.
// Throws DataError for missing files, wrong magic, truncation and count
// mismatches.
LabeledImageBatch load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                                 std::size_t limit = 0);

// ---- synthetic conditional densities ---------------------------------------

struct GaussianComponent {
  double weight = 1;
  std::vector<double> mean;
  std::vector<double> cov;  // D x D, row-major
};

struct SyntheticCondDensity {
  std::size_t dim = 0;
  std::vector<std::vector<GaussianComponent>> conditions;

  std::size_t n_conditions() const { return conditions.size(); }
  // Weights sum to 1 and covariances are positive definite; ConfigError otherwise.
  void validate() const;
  double log_prob(std::span<const double> x, int condition) const;
  std::vector<double> mean(int condition) const;
  // Exact differential entropy in nats; only single-component conditions.
  double entropy(int condition) const;

  struct Sample {
    Tensor<double> x;  // [N, D]
    std::vector<int> labels;
    std::vector<int> components;
    std::vector<double> log_p;  // exact log p(x | c)
  };
  // condition < 0 draws conditions uniformly.
  Sample sample(std::size_t n, Rng& rng, int condition = -1) const;
};

// Exact samples with their true log-densities, seeded.
SyntheticCondDensity::Sample synth_conditional(const SyntheticCondDensity& density, std::size_t n,
                                               std::uint64_t seed, int condition = -1);

// D = 2, four single-Gaussian conditions with distinct means and covariances.
SyntheticCondDensity gaussian_task();
// D = 2, two conditions, each a two-component mixture with modes at +-3 along
// a condition-specific axis and weights 0.5/0.5 and 0.3/0.7.
SyntheticCondDensity bimodal_task();

// ---- Lab color -------------------------------------------------------------

using Color = std::array<double, 3>;

// sRGB in [0, 1] with standard companding, D65 white point.
Color rgb_to_lab(const Color& rgb);
// Clips to [0, 1]; *clipped reports whether any channel left the gamut.
Color lab_to_rgb(const Color& lab, bool* clipped = nullptr);

// ---- colored shapes --------------------------------------------------------

struct ShapeItem {
  int cls = 0;   // 0 disc, 1 square, 2 diamond
  double cx = 0, cy = 0, r = 0;  // in units of the condition image side
  int mode = 0;  // palette mode (0 or 1)
};

struct Scene {
  std::vector<ShapeItem> shapes;
};

inline constexpr int kShapeClasses = 3;
inline constexpr int kPaletteModes = 2;
// Palette color (Lab) of a class/mode pair. Both modes of a class share L so
// the luminance condition cannot tell them apart.
Color palette_lab(int cls, int mode);
Color background_lab();

struct ColorizationBatch {
  Tensor<float> L;           // [N, 1, 2s, 2s], normalized
  Tensor<float> ab;          // [N, 2, s, s], normalized
  Tensor<float> shape_mask;  // [N, 1, s, s]: 1 where a shape touches the pixel
  std::vector<std::uint64_t> seeds;  // generator seed per item
  std::vector<std::size_t> items;    // stream index under that seed
  Normalization l_norm;      // L / 50 - 1
  Normalization ab_norm;     // ab / 128
};

Scene random_scene(Rng& rng);
// Same geometry, palette modes redrawn.
Scene recolor(const Scene& scene, Rng& rng);
// Renders RGB at the condition resolution 2s x 2s, converts to Lab and
// averages ab over 2x2 blocks to the target resolution s x s.
ColorizationBatch render_scenes(std::span<const Scene> scenes, std::size_t size);
// Item i is generated from derive_rng(seed, i). size must be even.
ColorizationBatch synth_colored_shapes(std::size_t n, std::size_t size, std::uint64_t seed);

// ---- export ----------------------------------------------------------------

// 8-bit PNG, channels 1 (gray) or 3 (RGB), row-major interleaved.
void write_png(const std::string& path, std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height,
               int channels);
// Gray image from a [H, W] plane mapped linearly from [lo, hi] to [0, 255].
void write_gray_png(const std::string& path, std::span<const float> plane, std::size_t width, std::size_t height,
                    double lo, double hi);
// RGB image from Lab planes (L at full resolution, ab upsampled by
// nearest-neighbor to match), values in raw Lab units.
void write_lab_png(const std::string& path, std::span<const float> l_plane, std::span<const float> a_plane,
                   std::span<const float> b_plane, std::size_t width, std::size_t height, std::size_t ab_width,
                   std::size_t ab_height);
// Raw little-endian float32 sidecar.
void write_f32(const std::string& path, std::span<const float> values);

// Writes one PNG per item plus manifest.csv (path,label) into dir.
void export_mnist(const std::string& dir, const LabeledImageBatch& batch);
// Writes one color PNG per item plus manifest.csv (path,seed,item) into dir.
void export_colorization(const std::string& dir, const ColorizationBatch& batch);

}  // namespace cinn::datasets
