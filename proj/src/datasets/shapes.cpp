// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "cinn/datasets/datasets.hpp"

namespace cinn::datasets {

namespace {

// D65 reference white, Y normalized to 1.
constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double linear_to_srgb(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1 / 2.4) - 0.055; }

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}
double lab_f_inv(double t) { return t > kDelta ? t * t * t : 3 * kDelta * kDelta * (t - 4.0 / 29.0); }

bool inside(const ShapeItem& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (s.cls) {
    case 0: return dx * dx + dy * dy <= s.r * s.r;
    case 1: return std::abs(dx) <= s.r && std::abs(dy) <= s.r;
    default: return std::abs(dx) + std::abs(dy) <= s.r * 1.3;
  }
}

}  // namespace

Color rgb_to_lab(const Color& rgb) {
  const double r = srgb_to_linear(rgb[0]), g = srgb_to_linear(rgb[1]), b = srgb_to_linear(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

Color lab_to_rgb(const Color& lab, bool* clipped) {
  const double fy = (lab[0] + 16) / 116, fx = fy + lab[1] / 500, fz = fy - lab[2] / 200;
  const double x = kXn * lab_f_inv(fx), y = kYn * lab_f_inv(fy), z = kZn * lab_f_inv(fz);
  const double lin[3] = {3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
                         -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
                         0.0556434 * x - 0.2040259 * y + 1.0572252 * z};
  Color out;
  bool clip = false;
  for (int i = 0; i < 3; ++i) {
    // Tolerate rounding noise at the gamut boundary before flagging.
    double c = linear_to_srgb(std::max(lin[i], 0.0));
    if (lin[i] < -1e-9 || c > 1 + 1e-9) clip = true;
    out[i] = std::clamp(c, 0.0, 1.0);
  }
  if (clipped) *clipped = clip;
  return out;
}

Color palette_lab(int cls, int mode) {
  // Same L within a class; the two modes sit on opposite sides of the a/b
  // plane so a luminance-only condition leaves the color ambiguous.
  static const Color table[kShapeClasses][kPaletteModes] = {
      {{{55, 45, 30}}, {{55, -40, 30}}},
      {{{60, 10, 45}}, {{60, 10, -40}}},
      {{{50, 40, -40}}, {{50, -30, 0}}},
  };
  if (cls < 0 || cls >= kShapeClasses || mode < 0 || mode >= kPaletteModes)
    throw ContractError("palette index out of range");
  return table[cls][mode];
}

Color background_lab() { return {70, 0, 0}; }

Scene random_scene(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 3), cls(0, kShapeClasses - 1), mode(0, kPaletteModes - 1);
  std::uniform_real_distribution<double> pos(0.2, 0.8), radius(0.1, 0.2);
  Scene s;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    ShapeItem it;
    it.cls = cls(rng);
    it.cx = pos(rng);
    it.cy = pos(rng);
    it.r = radius(rng);
    it.mode = mode(rng);
    s.shapes.push_back(it);
  }
  return s;
}

Scene recolor(const Scene& scene, Rng& rng) {
  std::uniform_int_distribution<int> mode(0, kPaletteModes - 1);
  Scene out = scene;
  for (auto& it : out.shapes) it.mode = mode(rng);
  return out;
}

ColorizationBatch render_scenes(std::span<const Scene> scenes, std::size_t size) {
  if (size == 0 || size % 2 != 0) throw ContractError("colored shapes need an even, nonzero target size");
  const std::size_t n = scenes.size(), hs = 2 * size;
  ColorizationBatch out;
  out.l_norm = {{50.0}, {50.0}};
  out.ab_norm = {{0.0}, {128.0}};
  Tensor<float> L({n, 1, hs, hs}), ab({n, 2, size, size}), mask({n, 1, size, size});

  // Palette colors go through RGB once so L and ab come from the same pixels.
  Color rgb_table[kShapeClasses][kPaletteModes];
  for (int c = 0; c < kShapeClasses; ++c)
    for (int m = 0; m < kPaletteModes; ++m) rgb_table[c][m] = lab_to_rgb(palette_lab(c, m));
  const Color bg_rgb = lab_to_rgb(background_lab());

  std::vector<Color> lab(hs * hs);
  std::vector<bool> covered(hs * hs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < hs; ++y)
      for (std::size_t x = 0; x < hs; ++x) {
        const double px = (x + 0.5) / hs, py = (y + 0.5) / hs;
        const Color* rgb = &bg_rgb;
        bool hit = false;
        for (const auto& s : scenes[i].shapes)  // later shapes paint over earlier ones
          if (inside(s, px, py)) {
            rgb = &rgb_table[s.cls][s.mode];
            hit = true;
          }
        lab[y * hs + x] = rgb_to_lab(*rgb);
        covered[y * hs + x] = hit;
        L[(i * hs + y) * hs + x] = static_cast<float>(lab[y * hs + x][0]);
      }
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        double a = 0, b = 0;
        bool any = false;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t k = (2 * y + dy) * hs + 2 * x + dx;
            a += lab[k][1] / 4;
            b += lab[k][2] / 4;
            any = any || covered[k];
          }
        ab[((i * 2 + 0) * size + y) * size + x] = static_cast<float>(a);
        ab[((i * 2 + 1) * size + y) * size + x] = static_cast<float>(b);
        mask[(i * size + y) * size + x] = any ? 1.0f : 0.0f;
      }
  }
  out.L = out.l_norm.normalize(L);
  out.ab = out.ab_norm.normalize(ab);
  out.shape_mask = std::move(mask);
  return out;
}

ColorizationBatch synth_colored_shapes(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = derive_rng(seed, i);
    scenes.push_back(random_scene(rng));
  }
  ColorizationBatch out = render_scenes(scenes, size);
  out.seeds.assign(n, seed);
  out.items.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.items[i] = i;
  return out;
}

}  // namespace cinn::datasets
