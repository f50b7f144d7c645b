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
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <vector>

#include "sis/tensor.hpp"

namespace sis {

/// sRGB in [0,1] to CIELAB (D65). Returns [h,w,3] with L in [0,100].
inline Tensor rgb_to_lab(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw ArgumentError("rgb_to_lab: expected [h,w,3]");
  // sRGB -> XYZ (D65). The reference white is the image of (1,1,1) so that
  // white maps to L = 100, a = b = 0 exactly.
  constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                              {0.2126729, 0.7151522, 0.0721750},
                              {0.0193339, 0.1191920, 0.9503041}};
  constexpr double white[3] = {m[0][0] + m[0][1] + m[0][2], m[1][0] + m[1][1] + m[1][2],
                               m[2][0] + m[2][1] + m[2][2]};
  constexpr double delta = 6.0 / 29.0;
  const auto linearize = [](double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const auto f = [](double t) {
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
  };

  Tensor lab(rgb.shape());
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    const double r = linearize(rgb[i]), g = linearize(rgb[i + 1]), b = linearize(rgb[i + 2]);
    double fx = f((m[0][0] * r + m[0][1] * g + m[0][2] * b) / white[0]);
    double fy = f((m[1][0] * r + m[1][1] * g + m[1][2] * b) / white[1]);
    double fz = f((m[2][0] * r + m[2][1] * g + m[2][2] * b) / white[2]);
    lab[i] = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
    lab[i + 1] = 500.0 * (fx - fy);
    lab[i + 2] = 200.0 * (fy - fz);
  }
  return lab;
}

/// Superpixel centroid in (y, x, L, a, b).
struct SuperpixelCentroid {
  double y = 0, x = 0, l = 0, a = 0, b = 0;
};

struct SuperpixelPartition {
  Tensor labels;  // [h,w], values in [0, n_superpixels)
  std::size_t n_superpixels = 0;
  std::vector<SuperpixelCentroid> centroids;
  std::vector<std::size_t> sizes;

  std::size_t height() const { return labels.dim(0); }
  std::size_t width() const { return labels.dim(1); }
  std::size_t label(std::size_t y, std::size_t x) const {
    return static_cast<std::size_t>(labels.at(y, x));
  }
};

/// Splits every label into 4-connected components, then repeatedly merges
/// the smallest component below `min_size` into its largest neighbour
/// (ties to the component found first in raster order). Output labels are
/// dense, numbered by first appearance in raster order.
inline Tensor enforce_connectivity(const Tensor& labels, std::size_t min_size) {
  if (labels.rank() != 2) throw ArgumentError("enforce_connectivity: labels must be [h,w]");
  const std::size_t h = labels.dim(0), w = labels.dim(1), n = h * w;
  for (double v : labels.data()) {
    if (v < 0) throw ArgumentError("enforce_connectivity: labels must be nonnegative");
  }

  // Component discovery, numbered in raster order of first pixel.
  std::vector<std::size_t> comp(n, std::numeric_limits<std::size_t>::max());
  std::vector<std::size_t> comp_size;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != std::numeric_limits<std::size_t>::max()) continue;
    const std::size_t id = comp_size.size();
    const double lab = labels[start];
    std::size_t count = 0;
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const std::size_t y = p / w, x = p % w;
      const auto visit = [&](std::size_t q) {
        if (comp[q] == std::numeric_limits<std::size_t>::max() && labels[q] == lab) {
          comp[q] = id;
          stack.push_back(q);
        }
      };
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
    }
    comp_size.push_back(count);
  }

  const std::size_t m = comp_size.size();
  std::vector<std::set<std::size_t>> adj(m);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t x = p % w;
    if (x + 1 < w && comp[p] != comp[p + 1]) {
      adj[comp[p]].insert(comp[p + 1]);
      adj[comp[p + 1]].insert(comp[p]);
    }
    if (p + w < n && comp[p] != comp[p + w]) {
      adj[comp[p]].insert(comp[p + w]);
      adj[comp[p + w]].insert(comp[p]);
    }
  }

  // Union-find style redirect; merged components point at their absorber.
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<bool> alive(m, true);
  using Entry = std::pair<std::size_t, std::size_t>;  // (size, id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (std::size_t c = 0; c < m; ++c) {
    if (comp_size[c] < min_size) queue.emplace(comp_size[c], c);
  }
  while (!queue.empty()) {
    const auto [size, c] = queue.top();
    queue.pop();
    if (!alive[c] || size != comp_size[c] || comp_size[c] >= min_size || adj[c].empty()) continue;
    std::size_t target = *adj[c].begin();
    for (std::size_t nb : adj[c]) {
      if (comp_size[nb] > comp_size[target]) target = nb;
    }
    alive[c] = false;
    parent[c] = target;
    comp_size[target] += comp_size[c];
    for (std::size_t nb : adj[c]) {
      adj[nb].erase(c);
      if (nb != target) {
        adj[nb].insert(target);
        adj[target].insert(nb);
      }
    }
    adj[c].clear();
    if (comp_size[target] < min_size) queue.emplace(comp_size[target], target);
  }

  const auto root = [&](std::size_t c) {
    while (parent[c] != c) c = parent[c];
    return c;
  };
  std::vector<std::size_t> dense(m, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  Tensor out(Shape{h, w});
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t r = root(comp[p]);
    if (dense[r] == std::numeric_limits<std::size_t>::max()) dense[r] = next++;
    out[p] = static_cast<double>(dense[r]);
  }
  return out;
}

/// Default orphan threshold: a quarter of the nominal superpixel area.
inline Tensor enforce_connectivity(const Tensor& labels) {
  if (labels.rank() != 2) throw ArgumentError("enforce_connectivity: labels must be [h,w]");
  const double top = *std::max_element(labels.data().begin(), labels.data().end());
  const auto expected = static_cast<std::size_t>(top) + 1;
  return enforce_connectivity(labels, labels.size() / expected / 4);
}

/// Builds a partition record (centroids in y, x, L, a, b and sizes) from dense labels.
inline SuperpixelPartition make_partition(Tensor labels, const Tensor& lab) {
  const std::size_t h = labels.dim(0), w = labels.dim(1);
  std::size_t count = 0;
  for (double v : labels.data()) count = std::max(count, static_cast<std::size_t>(v) + 1);
  SuperpixelPartition part{std::move(labels), count, std::vector<SuperpixelCentroid>(count),
                           std::vector<std::size_t>(count, 0)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t s = part.label(y, x);
      auto& c = part.centroids[s];
      c.y += static_cast<double>(y);
      c.x += static_cast<double>(x);
      c.l += lab.at(y, x, 0);
      c.a += lab.at(y, x, 1);
      c.b += lab.at(y, x, 2);
      ++part.sizes[s];
    }
  }
  for (std::size_t s = 0; s < count; ++s) {
    const double inv = part.sizes[s] ? 1.0 / static_cast<double>(part.sizes[s]) : 0.0;
    auto& c = part.centroids[s];
    c = {c.y * inv, c.x * inv, c.l * inv, c.a * inv, c.b * inv};
  }
  return part;
}

/// SLIC superpixels on a Lab image.
///
/// Seeds sit on a regular grid of step S = sqrt(h*w/n), each moved to the
/// lowest-gradient pixel of its 3x3 neighbourhood when that is strictly
/// lower than the grid pixel. Each Lloyd iteration assigns pixels within a
/// 2S x 2S window of a centre by D^2 = d_lab^2 + (compactness/S)^2 d_xy^2
/// (ties to the lower centre index); uncovered pixels fall back to a full
/// search. No randomness is involved.
inline SuperpixelPartition slic_segment(const Tensor& lab, std::size_t n, double compactness = 10.0,
                                        std::size_t iters = 10) {
  if (lab.rank() != 3 || lab.dim(2) != 3) throw ArgumentError("slic_segment: expected [h,w,3] Lab image");
  const std::size_t h = lab.dim(0), w = lab.dim(1), npx = h * w;
  if (n == 0) throw ArgumentError("slic_segment: n must be >= 1");
  if (n > npx) throw ArgumentError("slic_segment: more superpixels requested than pixels");
  if (iters == 0) throw ArgumentError("slic_segment: iters must be >= 1");

  const double step = std::sqrt(static_cast<double>(npx) / static_cast<double>(n));
  const std::size_t ny = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(h / step)), 1, h);
  const std::size_t nx = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(w / step)), 1, w);
  const double sy = static_cast<double>(h) / static_cast<double>(ny);
  const double sx = static_cast<double>(w) / static_cast<double>(nx);

  const auto gradient = [&](std::size_t y, std::size_t x) {
    const std::size_t y0 = y > 0 ? y - 1 : y, y1 = y + 1 < h ? y + 1 : y;
    const std::size_t x0 = x > 0 ? x - 1 : x, x1 = x + 1 < w ? x + 1 : x;
    double g = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double dx = lab.at(y, x1, c) - lab.at(y, x0, c);
      const double dy = lab.at(y1, x, c) - lab.at(y0, x, c);
      g += dx * dx + dy * dy;
    }
    return g;
  };

  struct Center {
    double y, x, l, a, b;
  };
  std::vector<Center> centers;
  centers.reserve(ny * nx);
  for (std::size_t gy = 0; gy < ny; ++gy) {
    for (std::size_t gx = 0; gx < nx; ++gx) {
      double cy = (static_cast<double>(gy) + 0.5) * sy - 0.5;
      double cx = (static_cast<double>(gx) + 0.5) * sx - 0.5;
      auto py = static_cast<std::size_t>(std::clamp<long>(std::lround(cy), 0, static_cast<long>(h) - 1));
      auto px = static_cast<std::size_t>(std::clamp<long>(std::lround(cx), 0, static_cast<long>(w) - 1));
      double best = gradient(py, px);
      std::size_t by = py, bx = px;
      for (std::size_t yy = py > 0 ? py - 1 : 0; yy <= std::min(py + 1, h - 1); ++yy) {
        for (std::size_t xx = px > 0 ? px - 1 : 0; xx <= std::min(px + 1, w - 1); ++xx) {
          const double g = gradient(yy, xx);
          if (g < best) {
            best = g;
            by = yy;
            bx = xx;
          }
        }
      }
      if (by != py || bx != px) {
        cy = static_cast<double>(by);
        cx = static_cast<double>(bx);
      }
      centers.push_back({cy, cx, lab.at(by, bx, 0), lab.at(by, bx, 1), lab.at(by, bx, 2)});
    }
  }

  const double spatial = (compactness / step) * (compactness / step);
  const auto dist = [&](const Center& c, std::size_t y, std::size_t x) {
    const double dl = lab.at(y, x, 0) - c.l, da = lab.at(y, x, 1) - c.a, db = lab.at(y, x, 2) - c.b;
    const double dy = static_cast<double>(y) - c.y, dx = static_cast<double>(x) - c.x;
    return dl * dl + da * da + db * db + spatial * (dy * dy + dx * dx);
  };

  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> assign(npx, none);
  std::vector<double> best(npx);
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(assign.begin(), assign.end(), none);
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const long y0 = std::max<long>(0, static_cast<long>(std::floor(c.y - step)));
      const long y1 = std::min<long>(static_cast<long>(h) - 1, static_cast<long>(std::ceil(c.y + step)));
      const long x0 = std::max<long>(0, static_cast<long>(std::floor(c.x - step)));
      const long x1 = std::min<long>(static_cast<long>(w) - 1, static_cast<long>(std::ceil(c.x + step)));
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          const double d = dist(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          if (d < best[p]) {
            best[p] = d;
            assign[p] = k;
          }
        }
      }
    }
    for (std::size_t p = 0; p < npx; ++p) {
      if (assign[p] != none) continue;
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const double d = dist(centers[k], p / w, p % w);
        if (d < best[p]) {
          best[p] = d;
          assign[p] = k;
        }
      }
    }

    std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t p = 0; p < npx; ++p) {
      const std::size_t y = p / w, x = p % w;
      auto& s = sums[assign[p]];
      s.y += static_cast<double>(y);
      s.x += static_cast<double>(x);
      s.l += lab.at(y, x, 0);
      s.a += lab.at(y, x, 1);
      s.b += lab.at(y, x, 2);
      ++counts[assign[p]];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[k]);
      centers[k] = {sums[k].y * inv, sums[k].x * inv, sums[k].l * inv, sums[k].a * inv, sums[k].b * inv};
    }
  }

  Tensor raw(Shape{h, w});
  for (std::size_t p = 0; p < npx; ++p) raw[p] = static_cast<double>(assign[p]);
  const std::size_t min_size = npx / n / 4;
  return make_partition(enforce_connectivity(raw, min_size), lab);
}

/// Per-superpixel channel means of t ([h,w] or [h,w,c]); returns [n_superpixels x c].
inline Matrix superpixel_means(const SuperpixelPartition& part, const Tensor& t) {
  const auto d = spatial_dims(t);
  if (d.height != part.height() || d.width != part.width()) {
    throw ArgumentError("superpixel_means: tensor spatial shape differs from partition");
  }
  Matrix sums(part.n_superpixels, d.channels);
  std::vector<std::size_t> counts(part.n_superpixels, 0);
  for (std::size_t p = 0; p < d.height * d.width; ++p) {
    const auto s = static_cast<std::size_t>(part.labels[p]);
    ++counts[s];
    for (std::size_t c = 0; c < d.channels; ++c) sums(s, c) += t[p * d.channels + c];
  }
  for (std::size_t s = 0; s < part.n_superpixels; ++s) {
    if (counts[s] == 0) continue;
    for (std::size_t c = 0; c < d.channels; ++c) sums(s, c) /= static_cast<double>(counts[s]);
  }
  return sums;
}

}  // namespace sis
