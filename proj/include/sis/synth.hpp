// Copyright (c) 2026 The sis Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sis/pnm.hpp"
#include "sis/tensor.hpp"

namespace sis {

enum class ShapeKind { kDisk, kRectangle };

struct SynthSpec {
  std::size_t count = 2;  // 1..8
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  bool mixed_shapes = false;  // alternate disks and rectangles
  std::size_t margin = 3;  // minimum gap between shapes, pixels
  std::size_t max_attempts = 2000;  // per shape
};

struct SynthShape {
  ShapeKind kind;
  double cy, cx;  // centre
  double ry, rx;  // radius (disk: ry == rx) or half extents
  std::array<std::uint8_t, 3> color;
};

struct SynthFixture {
  ImageBuffer image;  // 8-bit RGB
  Tensor saliency;  // [h,w] in {0,1}, union of the shapes
  Tensor features;  // [h,w,3] RGB on a 0..255 scale
  Tensor ground_truth;  // [h,w] label map, shape i -> label i+1
  std::vector<SynthShape> shapes;

  std::size_t k() const noexcept { return shapes.size(); }
};

namespace synth_detail {

inline constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette = {{
    {230, 40, 40}, {40, 200, 60}, {50, 80, 230}, {235, 220, 50},
    {210, 60, 210}, {60, 215, 215}, {245, 140, 30}, {240, 240, 240},
}};
inline constexpr std::array<std::uint8_t, 3> kBackground = {16, 16, 24};

// Uniform in [0,1) from the top 53 bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool covers(const SynthShape& s, double y, double x) {
  if (s.kind == ShapeKind::kDisk) {
    const double dy = y - s.cy, dx = x - s.cx;
    return dy * dy + dx * dx <= s.ry * s.ry;
  }
  return std::abs(y - s.cy) <= s.ry && std::abs(x - s.cx) <= s.rx;
}

// Conservative separation test on bounding circles.
inline bool separated(const SynthShape& a, const SynthShape& b, double margin) {
  const double ra = std::hypot(a.ry, a.rx) * (a.kind == ShapeKind::kDisk ? 1.0 / std::sqrt(2.0) : 1.0);
  const double rb = std::hypot(b.ry, b.rx) * (b.kind == ShapeKind::kDisk ? 1.0 / std::sqrt(2.0) : 1.0);
  return std::hypot(a.cy - b.cy, a.cx - b.cx) >= ra + rb + margin;
}

}  // namespace synth_detail

/// Deterministic fixture of non-overlapping coloured shapes on a dark
/// background. Each shape has its own palette colour; the saliency map is
/// the union of shape masks and the features are the RGB channels.
inline SynthFixture synth_fixture(const SynthSpec& spec) {
  using namespace synth_detail;
  if (spec.count < 1 || spec.count > 8) throw ArgumentError("synth: shape count must lie in [1,8]");
  if (spec.height < 8 || spec.width < 8) throw ArgumentError("synth: image must be at least 8x8");
  const std::size_t h = spec.height, w = spec.width;
  std::mt19937_64 rng(spec.seed);

  std::array<std::size_t, 8> colors = {0, 1, 2, 3, 4, 5, 6, 7};
  for (std::size_t i = colors.size() - 1; i > 0; --i) {
    std::swap(colors[i], colors[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1))]);
  }

  const double side = static_cast<double>(std::min(h, w));
  const double r_min = std::max(3.0, side * 0.08);
  const double r_max = std::max(r_min, side * 0.18);
  std::vector<SynthShape> shapes;
  for (std::size_t s = 0; s < spec.count; ++s) {
    const ShapeKind kind = spec.mixed_shapes && s % 2 == 1 ? ShapeKind::kRectangle : ShapeKind::kDisk;
    bool placed = false;
    for (std::size_t attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      SynthShape cand{kind, 0, 0, 0, 0, kPalette[colors[s]]};
      cand.ry = std::floor(r_min + uniform01(rng) * (r_max - r_min));
      cand.rx = kind == ShapeKind::kDisk ? cand.ry : std::floor(r_min + uniform01(rng) * (r_max - r_min));
      const double lo_y = cand.ry + 1, hi_y = static_cast<double>(h) - 2 - cand.ry;
      const double lo_x = cand.rx + 1, hi_x = static_cast<double>(w) - 2 - cand.rx;
      if (hi_y < lo_y || hi_x < lo_x) continue;
      cand.cy = std::floor(lo_y + uniform01(rng) * (hi_y - lo_y + 1));
      cand.cx = std::floor(lo_x + uniform01(rng) * (hi_x - lo_x + 1));
      placed = std::all_of(shapes.begin(), shapes.end(), [&](const SynthShape& o) {
        return separated(cand, o, static_cast<double>(spec.margin));
      });
      if (placed) shapes.push_back(cand);
    }
    if (!placed) {
      throw PlacementError("synth: could not place shape " + std::to_string(s + 1) + " of " +
                           std::to_string(spec.count) + " without overlap");
    }
  }

  SynthFixture f{ImageBuffer{h, w, 3, 255, std::vector<std::uint16_t>(h * w * 3)}, Tensor(Shape{h, w}),
                 Tensor(Shape{h, w, 3}), Tensor(Shape{h, w}), shapes};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      auto color = kBackground;
      for (std::size_t s = 0; s < shapes.size(); ++s) {
        if (!covers(shapes[s], static_cast<double>(y), static_cast<double>(x))) continue;
        color = shapes[s].color;
        f.saliency[p] = 1.0;
        f.ground_truth[p] = static_cast<double>(s + 1);
        break;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        f.image.samples[3 * p + c] = color[c];
        f.features[3 * p + c] = color[c];
      }
    }
  }
  return f;
}

}  // namespace sis
