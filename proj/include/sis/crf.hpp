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

// Binary fully connected CRF over pixels with a Potts compatibility.
//
//   E(s) = -sum_i log P_i(s_i) + sum_{i<j} k(i,j) [s_i != s_j]
//   k(i,j) = w1 exp(-|p_i-p_j|^2 / 2 theta_alpha^2 - |I_i-I_j|^2 / 2 theta_beta^2)
//          + w2 exp(-|p_i-p_j|^2 / 2 theta_gamma^2)
//
// Positions are pixel coordinates (y, x); colours are RGB on a 0..255
// scale. Image tensors passed in are [h,w,3] in [0,1] and are scaled here.
// Inference is exact O(N^2) parallel mean field.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "sis/resize.hpp"
#include "sis/tensor.hpp"

namespace sis {

struct CrfParams {
  double w1 = 30.0;
  double w2 = 30.0;
  double theta_alpha = 61.0;
  double theta_beta = 13.0;
  double theta_gamma = 1.0;
  std::size_t iters = 10;
  /// Larger inputs are refined on a downsampled grid no bigger than this per side.
  std::size_t max_side = 128;

  void validate() const {
    if (!(theta_alpha > 0 && theta_beta > 0 && theta_gamma > 0)) throw ArgumentError("CRF bandwidths must be > 0");
    if (!(w1 >= 0 && w2 >= 0)) throw ArgumentError("CRF weights must be >= 0");
    if (max_side == 0) throw ArgumentError("CRF max_side must be >= 1");
  }
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Per-pixel (background, salient) probabilities, [h,w,2].
struct UnaryField {
  Tensor probs;

  std::size_t height() const { return probs.dim(0); }
  std::size_t width() const { return probs.dim(1); }
  double salient(std::size_t y, std::size_t x) const { return probs.at(y, x, 1); }

  void validate() const {
    if (probs.rank() != 3 || probs.dim(2) != 2) throw ArgumentError("unary field must be [h,w,2]");
    for (std::size_t i = 0; i < probs.size(); i += 2) {
      const double a = probs[i], b = probs[i + 1];
      if (!(a >= 0 && b >= 0) || std::abs(a + b - 1.0) > 1e-9) {
        throw ArgumentError("unary field pixel " + std::to_string(i / 2) + " is not a distribution");
      }
    }
  }

  /// (1 - s, s) from a saliency map in [0,1].
  static UnaryField from_saliency(const Tensor& saliency) {
    if (saliency.rank() != 2) throw ArgumentError("saliency map must be [h,w]");
    UnaryField f{Tensor(Shape{saliency.dim(0), saliency.dim(1), 2})};
    for (std::size_t i = 0; i < saliency.size(); ++i) {
      const double s = std::clamp(saliency[i], 0.0, 1.0);
      f.probs[2 * i] = 1.0 - s;
      f.probs[2 * i + 1] = s;
    }
    return f;
  }

  Tensor saliency() const {
    Tensor s(Shape{height(), width()});
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = probs[2 * i + 1];
    return s;
  }
};

/// k(i,j): appearance plus smoothness kernel, multiplying the Potts indicator.
inline double pairwise_kernel(std::span<const double, 2> p_i, std::span<const double, 2> p_j,
                              std::span<const double, 3> rgb_i, std::span<const double, 3> rgb_j,
                              const CrfParams& params) {
  const double dp = (p_i[0] - p_j[0]) * (p_i[0] - p_j[0]) + (p_i[1] - p_j[1]) * (p_i[1] - p_j[1]);
  double di = 0.0;
  for (std::size_t c = 0; c < 3; ++c) di += (rgb_i[c] - rgb_j[c]) * (rgb_i[c] - rgb_j[c]);
  const double a2 = 2.0 * params.theta_alpha * params.theta_alpha;
  const double b2 = 2.0 * params.theta_beta * params.theta_beta;
  const double g2 = 2.0 * params.theta_gamma * params.theta_gamma;
  return params.w1 * std::exp(-dp / a2 - di / b2) + params.w2 * std::exp(-dp / g2);
}

namespace crf_detail {

inline void check_image(const Tensor& img, std::size_t h, std::size_t w) {
  if (img.rank() != 3 || img.dim(2) != 3 || img.dim(0) != h || img.dim(1) != w) {
    throw ArgumentError("CRF image must be [h,w,3] matching the field");
  }
}

// Pixel i as (y, x) scaled by `pos_scale` and colour on 0..255.
struct PixelSites {
  std::vector<std::array<double, 2>> pos;
  std::vector<std::array<double, 3>> rgb;

  PixelSites(const Tensor& img, double pos_scale = 1.0) {
    const std::size_t h = img.dim(0), w = img.dim(1);
    pos.resize(h * w);
    rgb.resize(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      pos[i] = {static_cast<double>(i / w) * pos_scale, static_cast<double>(i % w) * pos_scale};
      rgb[i] = {img[3 * i] * 255.0, img[3 * i + 1] * 255.0, img[3 * i + 2] * 255.0};
    }
  }

  double kernel(std::size_t i, std::size_t j, const CrfParams& p) const {
    return pairwise_kernel(pos[i], pos[j], rgb[i], rgb[j], p);
  }
};

}  // namespace crf_detail

/// Energy of a binary labeling (1 = salient) over all unordered pixel pairs.
inline double crf_energy(const Tensor& labels, const UnaryField& unary, const Tensor& img, const CrfParams& params) {
  params.validate();
  unary.validate();
  const std::size_t h = unary.height(), w = unary.width(), n = h * w;
  if (labels.rank() != 2 || labels.dim(0) != h || labels.dim(1) != w) throw ArgumentError("crf_energy: label shape");
  crf_detail::check_image(img, h, w);
  for (double v : labels.data()) {
    if (v != 0.0 && v != 1.0) throw ArgumentError("crf_energy: labels must be binary");
  }
  const crf_detail::PixelSites sites(img);
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e -= std::log(std::max(unary.probs[2 * i + static_cast<std::size_t>(labels[i])], kProbabilityFloor));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] != labels[j]) e += sites.kernel(i, j, params);
    }
  }
  return e;
}

using MeanFieldObserver = std::function<void(std::size_t iteration, const UnaryField& q)>;

namespace crf_detail {

inline UnaryField mean_field_exact(const UnaryField& unary, const Tensor& img, const CrfParams& params,
                                   double pos_scale, const MeanFieldObserver& observer) {
  const std::size_t n = unary.height() * unary.width();
  const PixelSites sites(img, pos_scale);
  std::vector<double> u0(n), u1(n);
  for (std::size_t i = 0; i < n; ++i) {
    u0[i] = -std::log(std::max(unary.probs[2 * i], kProbabilityFloor));
    u1[i] = -std::log(std::max(unary.probs[2 * i + 1], kProbabilityFloor));
  }

  UnaryField q = unary;
  std::vector<double> msg0(n), msg1(n);
  for (std::size_t it = 0; it < params.iters; ++it) {
    // msg_l(i) = sum_{j != i} k(i,j) Q_j(not l): the Potts penalty for taking label l.
    std::fill(msg0.begin(), msg0.end(), 0.0);
    std::fill(msg1.begin(), msg1.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double qi0 = q.probs[2 * i], qi1 = q.probs[2 * i + 1];
      for (std::size_t j = i + 1; j < n; ++j) {
        const double k = sites.kernel(i, j, params);
        msg0[i] += k * q.probs[2 * j + 1];
        msg1[i] += k * q.probs[2 * j];
        msg0[j] += k * qi1;
        msg1[j] += k * qi0;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double e0 = -u0[i] - msg0[i];
      const double e1 = -u1[i] - msg1[i];
      const double top = std::max(e0, e1);
      const double a = std::exp(e0 - top), b = std::exp(e1 - top);
      q.probs[2 * i] = a / (a + b);
      q.probs[2 * i + 1] = b / (a + b);
    }
    if (observer) observer(it, q);
  }
  return q;
}

}  // namespace crf_detail

/// Parallel mean-field updates Q_i(l) ∝ exp(-u_i(l) - sum_{j≠i} k(i,j) Q_j(¬l)),
/// starting from the unary field. Fields larger than params.max_side per
/// side are refined on a bilinearly downsampled grid (positions kept in
/// original pixel units) and the salient probability is upsampled back.
inline UnaryField mean_field_refine(const UnaryField& unary, const Tensor& img, const CrfParams& params,
                                    const MeanFieldObserver& observer = {}) {
  params.validate();
  unary.validate();
  const std::size_t h = unary.height(), w = unary.width();
  crf_detail::check_image(img, h, w);
  if (params.w1 == 0.0 && params.w2 == 0.0) {
    for (std::size_t it = 0; it < params.iters && observer; ++it) observer(it, unary);
    return unary;
  }
  const std::size_t side = std::max(h, w);
  if (side <= params.max_side) return crf_detail::mean_field_exact(unary, img, params, 1.0, observer);

  const double factor = static_cast<double>(params.max_side) / static_cast<double>(side);
  const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(h * factor)));
  const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w * factor)));
  const auto small = UnaryField::from_saliency(resize_bilinear(unary.saliency(), sh, sw));
  const auto refined = crf_detail::mean_field_exact(small, resize_bilinear(img, sh, sw), params,
                                                    static_cast<double>(side) / static_cast<double>(std::max(sh, sw)),
                                                    observer);
  return UnaryField::from_saliency(resize_bilinear(refined.saliency(), h, w));
}

/// 1 where P(salient) >= threshold.
inline Tensor binarize(const UnaryField& field, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("binarize: threshold must lie in (0,1)");
  Tensor out(Shape{field.height(), field.width()});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field.probs[2 * i + 1] >= threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace sis
