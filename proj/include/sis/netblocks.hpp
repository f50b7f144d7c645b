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

// Forward kernels for the network building blocks used by the subitizing
// and saliency networks: squeeze-and-excitation channel recalibration,
// dense-block connectivity (BN -> ReLU -> 3x3 conv, concatenated), and the
// weighted cross-entropy loss with its analytic gradient.
//
// Tensors are laid out [H, W, C]. Fully connected weights are row-major
// [out, in]. Convolution kernels are [3, 3, in, out] cross-correlations with
// zero padding of one pixel, so spatial shape is preserved.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sis/tensor.hpp"

namespace sis {

struct SeParams {
  Matrix w1;  // [C/r x C]
  std::vector<double> b1;  // [C/r]
  Matrix w2;  // [C x C/r]
  std::vector<double> b2;  // [C]
  std::size_t r = 16;

  std::size_t channels() const noexcept { return w1.cols(); }
  std::size_t bottleneck() const noexcept { return w1.rows(); }

  /// All-zero parameters for `channels` inputs at reduction ratio `r`.
  static SeParams zeros(std::size_t channels, std::size_t r = 16) {
    if (r == 0 || channels % r != 0) throw ArgumentError("SE: channel count must be divisible by r");
    const std::size_t hidden = channels / r;
    return {Matrix(hidden, channels), std::vector<double>(hidden), Matrix(channels, hidden),
            std::vector<double>(channels), r};
  }

  void validate() const {
    const std::size_t c = channels();
    if (r == 0 || c % r != 0) throw ArgumentError("SE: channel count must be divisible by r");
    if (w1.rows() != c / r) throw ArgumentError("SE: w1 must have C/r rows");
    if (b1.size() != c / r) throw ArgumentError("SE: b1 must have C/r entries");
    if (w2.rows() != c || w2.cols() != c / r) throw ArgumentError("SE: w2 must be C x C/r");
    if (b2.size() != c) throw ArgumentError("SE: b2 must have C entries");
  }
};

/// Logistic function, clamped so the result stays strictly inside (0, 1)
/// where the double form would round to an endpoint.
inline double sigmoid(double z) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  double s;
  if (z >= 0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

/// Channel gates g = sigmoid(W2 relu(W1 v + b1) + b2), v the global average pool of x.
inline std::vector<double> se_gate(const Tensor& x, const SeParams& p) {
  p.validate();
  if (x.rank() != 3 || x.dim(2) != p.channels()) {
    throw ArgumentError("se_forward: input must be [H,W," + std::to_string(p.channels()) + "], got " +
                        shape_string(x.shape()));
  }
  const std::size_t c = p.channels();
  const std::size_t hw = x.dim(0) * x.dim(1);
  if (hw == 0) throw ArgumentError("se_forward: empty spatial extent");

  std::vector<double> pooled(c, 0.0);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) pooled[ch] += x[i * c + ch];
  }
  for (auto& v : pooled) v /= static_cast<double>(hw);

  std::vector<double> hidden(p.bottleneck());
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    double z = p.b1[j];
    for (std::size_t ch = 0; ch < c; ++ch) z += p.w1(j, ch) * pooled[ch];
    hidden[j] = std::max(z, 0.0);
  }
  std::vector<double> gate(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double z = p.b2[ch];
    for (std::size_t j = 0; j < hidden.size(); ++j) z += p.w2(ch, j) * hidden[j];
    gate[ch] = sigmoid(z);
  }
  return gate;
}

inline Tensor se_forward(const Tensor& x, const SeParams& p) {
  const auto gate = se_gate(x, p);
  Tensor out = x;
  const std::size_t c = gate.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= gate[i % c];
  return out;
}

struct DenseLayerParams {
  std::vector<double> bn_gamma;
  std::vector<double> bn_beta;
  std::vector<double> bn_mean;
  std::vector<double> bn_var;
  Tensor conv_kernel;  // [3, 3, in_channels, growth]

  std::size_t in_channels() const noexcept { return bn_gamma.size(); }
  std::size_t growth() const { return conv_kernel.rank() == 4 ? conv_kernel.dim(3) : 0; }

  void validate() const {
    const std::size_t c = in_channels();
    if (bn_beta.size() != c || bn_mean.size() != c || bn_var.size() != c) {
      throw ArgumentError("dense layer: batch-norm vectors must share one length");
    }
    for (double v : bn_var) {
      if (!(v > 0.0)) throw ArgumentError("dense layer: bn_var must be strictly positive");
    }
    const auto& k = conv_kernel.shape();
    if (k.size() != 4 || k[0] != 3 || k[1] != 3) throw ArgumentError("dense layer: kernel must be [3,3,in,growth]");
    if (k[2] != c) throw ArgumentError("dense layer: kernel input channels disagree with batch-norm length");
  }
};

/// H_l: inference-mode batch norm, ReLU, then 3x3 convolution (padding 1).
inline Tensor dense_layer_forward(const Tensor& x, const DenseLayerParams& p) {
  p.validate();
  if (x.rank() != 3 || x.dim(2) != p.in_channels()) {
    throw ArgumentError("dense layer: expected " + std::to_string(p.in_channels()) + " input channels, got shape " +
                        shape_string(x.shape()));
  }
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2), g = p.growth();

  Tensor act(x.shape());
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double z = (x[i * c + ch] - p.bn_mean[ch]) / std::sqrt(p.bn_var[ch]) * p.bn_gamma[ch] + p.bn_beta[ch];
      act[i * c + ch] = std::max(z, 0.0);
    }
  }

  Tensor out(Shape{h, w, g});
  const auto& k = p.conv_kernel;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x0 = 0; x0 < w; ++x0) {
      double* o = &out[(y * w + x0) * g];
      for (std::size_t dy = 0; dy < 3; ++dy) {
        const auto sy = static_cast<std::ptrdiff_t>(y + dy) - 1;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const auto sx = static_cast<std::ptrdiff_t>(x0 + dx) - 1;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* a = &act[(static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * c];
          for (std::size_t ci = 0; ci < c; ++ci) {
            const double av = a[ci];
            if (av == 0.0) continue;
            const double* kr = &k[((dy * 3 + dx) * c + ci) * g];
            for (std::size_t co = 0; co < g; ++co) o[co] += av * kr[co];
          }
        }
      }
    }
  }
  return out;
}

/// Concatenates two [H,W,*] tensors along the channel axis.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) {
    throw ArgumentError("concat_channels: spatial shapes differ");
  }
  const std::size_t hw = a.dim(0) * a.dim(1), ca = a.dim(2), cb = b.dim(2);
  Tensor out(Shape{a.dim(0), a.dim(1), ca + cb});
  for (std::size_t i = 0; i < hw; ++i) {
    std::copy_n(&a[i * ca], ca, &out[i * (ca + cb)]);
    std::copy_n(&b[i * cb], cb, &out[i * (ca + cb) + ca]);
  }
  return out;
}

/// x_l = H_l([x_0, ..., x_{l-1}]); returns the full concatenation [x_0, ..., x_L].
inline Tensor dense_block_forward(const Tensor& x0, const std::vector<DenseLayerParams>& layers) {
  if (x0.rank() != 3) throw ArgumentError("dense_block_forward: input must be [H,W,C]");
  Tensor features = x0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].in_channels() != features.dim(2)) {
      throw ArgumentError("dense_block_forward: layer " + std::to_string(l) + " expects " +
                          std::to_string(layers[l].in_channels()) + " channels but receives " +
                          std::to_string(features.dim(2)));
    }
    features = concat_channels(features, dense_layer_forward(features, layers[l]));
  }
  return features;
}

struct CrossEntropyOptions {
  double clamp_eps = 1e-12;
  /// Reject rows of `yhat` that are not probability distributions. The
  /// finite-difference harness disables this to perturb single entries.
  bool require_normalized = true;
};

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor gradient;  // d loss / d yhat, [N, C]
  bool clamped = false;  // some true-class probability fell below clamp_eps
};

/// L = -(1/N) sum_i sum_c w_c y_ic log(yhat_ic). Empty `class_weights` means all ones.
inline CrossEntropyResult weighted_cross_entropy(const Tensor& yhat, const Tensor& y,
                                                 std::span<const double> class_weights = {},
                                                 const CrossEntropyOptions& opts = {}) {
  if (yhat.rank() != 2 || y.shape() != yhat.shape()) throw ArgumentError("cross entropy: yhat and y must both be [N,C]");
  const std::size_t n = yhat.dim(0), c = yhat.dim(1);
  if (n == 0 || c == 0) throw ArgumentError("cross entropy: empty batch");
  if (!class_weights.empty() && class_weights.size() != c) throw ArgumentError("cross entropy: one weight per class");

  for (std::size_t i = 0; i < n; ++i) {
    int ones = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double t = y.at(i, k);
      if (t != 0.0 && t != 1.0) throw ArgumentError("cross entropy: y must be one-hot");
      ones += t == 1.0;
      const double p = yhat.at(i, k);
      if (!std::isfinite(p)) throw ArgumentError("cross entropy: non-finite prediction");
      if (opts.require_normalized && (p < 0.0 || p > 1.0)) {
        throw ArgumentError("cross entropy: probabilities must lie in [0,1]");
      }
      sum += p;
    }
    if (ones != 1) throw ArgumentError("cross entropy: y must be one-hot");
    if (opts.require_normalized && std::abs(sum - 1.0) > 1e-9) {
      throw ArgumentError("cross entropy: row " + std::to_string(i) + " does not sum to 1");
    }
  }

  CrossEntropyResult result{0.0, Tensor(yhat.shape()), false};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      if (y.at(i, k) == 0.0) continue;
      const double w = class_weights.empty() ? 1.0 : class_weights[k];
      double p = yhat.at(i, k);
      if (p < opts.clamp_eps) {
        p = opts.clamp_eps;
        result.clamped = true;
      }
      result.loss -= inv_n * w * std::log(p);
      result.gradient.at(i, k) = -inv_n * w / p;
    }
  }
  return result;
}

using ScalarFunction = std::function<double(const Tensor&)>;
using GradientFunction = std::function<Tensor(const Tensor&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
inline double finite_diff_check(const ScalarFunction& f, const GradientFunction& grad, const Tensor& x,
                                double eps = 1e-5) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ArgumentError("finite_diff_check: eps must lie in (0, 1e-3]");
  const Tensor analytic = grad(x);
  if (analytic.shape() != x.shape()) throw ArgumentError("finite_diff_check: gradient shape differs from input");
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace sis
