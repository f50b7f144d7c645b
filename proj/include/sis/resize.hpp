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

#include <algorithm>
#include <cmath>

#include "sis/tensor.hpp"

namespace sis {

namespace resize_detail {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Half-pixel-centre sampling (align_corners = false), clamped at the border.
inline std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> result(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    result[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return result;
}

}  // namespace resize_detail

/// Bilinear resampling of an [h,w] or [h,w,c] tensor; the rank is preserved.
/// Each output is a convex combination of inputs, so per-channel ranges are kept.
inline Tensor resize_bilinear(const Tensor& t, std::size_t out_h, std::size_t out_w) {
  const auto d = spatial_dims(t);
  if (out_h == 0 || out_w == 0) throw ArgumentError("resize_bilinear: zero target dimension");
  if (d.height == 0 || d.width == 0) throw ArgumentError("resize_bilinear: empty input");
  if (out_h == d.height && out_w == d.width) return t;

  const auto ty = resize_detail::taps(d.height, out_h);
  const auto tx = resize_detail::taps(d.width, out_w);
  Shape shape = t.rank() == 2 ? Shape{out_h, out_w} : Shape{out_h, out_w, d.channels};
  Tensor out(std::move(shape));
  const auto src = t.data();
  const std::size_t c = d.channels;
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, fy] = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, fx] = tx[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = src[(y0 * d.width + x0) * c + ch];
        const double v01 = src[(y0 * d.width + x1) * c + ch];
        const double v10 = src[(y1 * d.width + x0) * c + ch];
        const double v11 = src[(y1 * d.width + x1) * c + ch];
        const double top = v00 + (v01 - v00) * fx;
        const double bottom = v10 + (v11 - v10) * fx;
        double v = top + (bottom - top) * fy;
        // Rounding can push a convex combination one ulp outside its inputs.
        const double lo = std::min({v00, v01, v10, v11});
        const double hi = std::max({v00, v01, v10, v11});
        out[(y * out_w + x) * c + ch] = std::clamp(v, lo, hi);
      }
    }
  }
  return out;
}

}  // namespace sis
