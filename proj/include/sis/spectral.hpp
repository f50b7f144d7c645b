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

// Salient instance clustering: superpixel affinity graph over deep
// features, normalized-Laplacian spectral embedding, k-means seeded at
// fractile positions, and painting of the cluster labels back to pixels.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sis/slic.hpp"
#include "sis/symmetric_eigen.hpp"
#include "sis/tensor.hpp"

namespace sis {

struct SpectralParams {
  double lambda = 3.0;  // spatial-distance weight
  double sigma2 = 10.0;  // feature bandwidth
  std::size_t k = 1;  // instance count
  double saliency_threshold = 0.5;
  std::size_t kmeans_max_iters = 100;

  void validate() const {
    if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
    if (!(sigma2 > 0.0)) throw ArgumentError("sigma2 must be > 0");
    if (k < 1) throw ArgumentError("k must be >= 1");
  }
};

struct AffinityGraph {
  Matrix w;  // symmetric, unit diagonal
  std::vector<double> degrees;  // d_i = sum_j w_ij

  std::size_t size() const noexcept { return degrees.size(); }
};

/// w_ij = exp(-|c_i - c_j| / sigma2) / (1 + lambda |d_i - d_j|), Euclidean norms.
inline AffinityGraph build_affinity(const Matrix& features, const Matrix& positions, const SpectralParams& p) {
  p.validate();
  const std::size_t n = features.rows();
  if (n == 0) throw ArgumentError("build_affinity: no nodes");
  if (positions.rows() != n) throw ArgumentError("build_affinity: feature and position row counts differ");
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw ArgumentError("build_affinity: non-finite feature value");
  }
  for (double v : positions.data()) {
    if (!std::isfinite(v)) throw ArgumentError("build_affinity: non-finite position value");
  }

  AffinityGraph g{Matrix(n, n), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    g.w(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double feat = std::sqrt(squared_distance(features.row(i), features.row(j)));
      const double space = std::sqrt(squared_distance(positions.row(i), positions.row(j)));
      const double v = std::exp(-feat / p.sigma2) / (1.0 + p.lambda * space);
      g.w(i, j) = g.w(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.degrees[i] += g.w(i, j);
  }
  return g;
}

/// L_sym = D^{-1/2} (D - W) D^{-1/2}.
inline Matrix normalized_laplacian(const AffinityGraph& g) {
  const std::size_t n = g.size();
  if (g.w.rows() != n || g.w.cols() != n) throw ArgumentError("normalized_laplacian: inconsistent graph");
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(g.degrees[i] > 0.0)) throw ArgumentError("normalized_laplacian: zero degree at node " + std::to_string(i));
    inv_sqrt[i] = 1.0 / std::sqrt(g.degrees[i]);
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dw = (i == j ? g.degrees[i] : 0.0) - g.w(i, j);
      l(i, j) = inv_sqrt[i] * dw * inv_sqrt[j];
    }
  }
  // Enforce exact symmetry; the two products above can differ in the last bit.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) l(j, i) = l(i, j);
  }
  return l;
}

struct SpectralEmbedding {
  Matrix u;  // [n x k]
  std::vector<double> eigenvalues;  // ascending, length k
};

inline SpectralEmbedding smallest_k_eigenvectors(const Matrix& m, std::size_t k) {
  if (k > m.rows()) throw ArgumentError("smallest_k_eigenvectors: k exceeds matrix size");
  const auto eig = jacobi_eigen(m);
  SpectralEmbedding out{Matrix(m.rows(), k), std::vector<double>(eig.values.begin(), eig.values.begin() + k)};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) out.u(r, c) = eig.vectors(r, c);
  }
  return out;
}

/// Rows scaled to unit Euclidean norm; all-zero rows are left as is.
inline Matrix normalize_rows(Matrix u) {
  for (std::size_t r = 0; r < u.rows(); ++r) {
    auto row = u.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    if (norm == 0.0) continue;
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  return u;
}

/// Percentages 50/k + (i-1) 100/k for i = 1..k: the centre of each of k equal parts.
inline std::vector<double> fractile_percentages(std::size_t k) {
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = 50.0 / static_cast<double>(k) + static_cast<double>(i) * 100.0 / static_cast<double>(k);
  return out;
}

/// Zero-based sorted positions floor(((2i-1) n) / (2k)) for i = 1..k, the
/// integer form of floor(fractile_percentage_i / 100 * n), clamped to n-1.
inline std::vector<std::size_t> fractile_positions(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(k);
  for (std::size_t i = 1; i <= k; ++i) out[i - 1] = std::min(((2 * i - 1) * n) / (2 * k), n - 1);
  return out;
}

/// Initial k-means centres: rows sorted ascending by first-column value
/// (ties by row index), the row at each fractile position becomes a centre.
inline Matrix quantile_init(const Matrix& u, std::size_t k) {
  const std::size_t n = u.rows();
  if (k < 1) throw ArgumentError("quantile_init: k must be >= 1");
  if (n < k) throw ArgumentError("quantile_init: fewer rows than clusters");
  if (u.cols() == 0) throw ArgumentError("quantile_init: embedding has no columns");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u(a, 0) < u(b, 0); });
  Matrix centers(k, u.cols());
  const auto pos = fractile_positions(n, k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = u.row(order[pos[i]]);
    std::copy(src.begin(), src.end(), centers.row(i).begin());
  }
  return centers;
}

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centers;
  std::size_t iterations = 0;
  double inertia = 0.0;  // within-cluster sum of squares
};

/// Lloyd iterations from the given centres. Ties go to the lower centre
/// index; iteration stops at an assignment fixpoint or after `max_iters`.
/// An emptied cluster is re-seeded at the point farthest from its own centre.
inline KMeansResult kmeans(const Matrix& points, Matrix centers, std::size_t max_iters = 100) {
  const std::size_t n = points.rows(), k = centers.rows(), d = points.cols();
  if (k == 0) throw ArgumentError("kmeans: no centres");
  if (centers.cols() != d) throw ArgumentError("kmeans: centre dimension differs from points");
  if (n < k) throw ArgumentError("kmeans: fewer points than centres");

  // Separate coincident initial centres.
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (squared_distance(centers.row(i), centers.row(j)) != 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t r = 0; r < n; ++r) {
          lo = std::min(lo, points(r, c));
          hi = std::max(hi, points(r, c));
        }
        const double range = hi > lo ? hi - lo : 1.0;
        centers(j, c) += 1e-9 * range * static_cast<double>(j);
      }
      break;
    }
  }

  KMeansResult result{std::vector<std::size_t>(n, k), std::move(centers), 0, 0.0};
  auto& labels = result.labels;
  auto& ctr = result.centers;
  std::vector<std::size_t> next(n);
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iters, 1); ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = 0;
      double best_d = squared_distance(points.row(r), ctr.row(0));
      for (std::size_t j = 1; j < k; ++j) {
        const double dj = squared_distance(points.row(r), ctr.row(j));
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      next[r] = best;
    }
    if (next == labels) break;
    labels = next;
    result.iterations = it + 1;

    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      ++counts[labels[r]];
      for (std::size_t c = 0; c < d; ++c) sums(labels[r], c) += points(r, c);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t c = 0; c < d; ++c) ctr(j, c) = sums(j, c) / static_cast<double>(counts[j]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (counts[labels[r]] <= 1) continue;
        const double dr = squared_distance(points.row(r), ctr.row(labels[r]));
        if (dr > far_d) {
          far_d = dr;
          far = r;
        }
      }
      --counts[labels[far]];
      labels[far] = j;
      counts[j] = 1;
      const auto src = points.row(far);
      std::copy(src.begin(), src.end(), ctr.row(j).begin());
    }
  }

  // Final centres and inertia reflect the returned assignment.
  Matrix sums(k, d);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t r = 0; r < n; ++r) {
    ++counts[labels[r]];
    for (std::size_t c = 0; c < d; ++c) sums(labels[r], c) += points(r, c);
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    for (std::size_t c = 0; c < d; ++c) ctr(j, c) = sums(j, c) / static_cast<double>(counts[j]);
  }
  result.inertia = 0.0;
  for (std::size_t r = 0; r < n; ++r) result.inertia += squared_distance(points.row(r), ctr.row(labels[r]));
  return result;
}

struct InstanceSegmentation {
  Tensor labels;  // [h,w], 0 = background, 1..k instances
  std::vector<double> confidences;  // mean saliency per instance
  std::vector<std::string> warnings;

  std::size_t instance_count() const noexcept { return confidences.size(); }
};

/// Relabels 1..k so that instance 1 owns the first non-background pixel in
/// raster order, instance 2 the first pixel not in instance 1, and so on.
inline Tensor canonicalize_instance_labels(const Tensor& labels) {
  std::vector<long> remap;
  Tensor out = labels;
  long next = 1;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto v = static_cast<long>(labels[p]);
    if (v <= 0) continue;
    if (static_cast<std::size_t>(v) >= remap.size()) remap.resize(static_cast<std::size_t>(v) + 1, 0);
    if (remap[static_cast<std::size_t>(v)] == 0) remap[static_cast<std::size_t>(v)] = next++;
    out[p] = static_cast<double>(remap[static_cast<std::size_t>(v)]);
  }
  return out;
}

/// Graph nodes built from the salient part of a partition.
struct SalientNodes {
  std::vector<std::size_t> superpixels;  // node -> superpixel id
  Matrix features;  // [n x c] mean feature over the salient pixels of each node
  Matrix positions;  // [n x 2] mean (y, x), scaled by 1 / max(h-1, w-1, 1)
};

inline SalientNodes salient_nodes(const SuperpixelPartition& part, const Tensor& saliency, const Tensor& features,
                                  double threshold) {
  const std::size_t h = part.height(), w = part.width();
  const auto fd = spatial_dims(features);
  if (saliency.rank() != 2 || saliency.dim(0) != h || saliency.dim(1) != w || fd.height != h || fd.width != w) {
    throw ArgumentError("cluster_instances: saliency, features and partition must share spatial shape");
  }
  const std::size_t c = fd.channels;
  std::vector<std::size_t> counts(part.n_superpixels, 0);
  Matrix fsum(part.n_superpixels, c), psum(part.n_superpixels, 2);
  for (std::size_t p = 0; p < h * w; ++p) {
    if (saliency[p] < threshold) continue;
    const auto s = static_cast<std::size_t>(part.labels[p]);
    ++counts[s];
    for (std::size_t ch = 0; ch < c; ++ch) fsum(s, ch) += features[p * c + ch];
    psum(s, 0) += static_cast<double>(p / w);
    psum(s, 1) += static_cast<double>(p % w);
  }
  SalientNodes nodes;
  for (std::size_t s = 0; s < part.n_superpixels; ++s) {
    if (counts[s] > 0) nodes.superpixels.push_back(s);
  }
  const std::size_t n = nodes.superpixels.size();
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>({h - 1, w - 1, 1}));
  nodes.features = Matrix(n, c);
  nodes.positions = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = nodes.superpixels[i];
    const double inv = 1.0 / static_cast<double>(counts[s]);
    for (std::size_t ch = 0; ch < c; ++ch) nodes.features(i, ch) = fsum(s, ch) * inv;
    nodes.positions(i, 0) = psum(s, 0) * inv * scale;
    nodes.positions(i, 1) = psum(s, 1) * inv * scale;
  }
  return nodes;
}

/// Clusters the salient superpixels into p.k instances.
///
/// Pixels with saliency below the threshold are background (label 0).
/// Every superpixel holding at least one salient pixel is a graph node;
/// its feature and position are averaged over its salient pixels only.
/// The k smallest eigenvectors of the normalized Laplacian, row-normalized,
/// are clustered by k-means from fractile initial centres, and each salient
/// pixel takes the cluster of its superpixel.
inline InstanceSegmentation cluster_instances(const SuperpixelPartition& part, const Tensor& saliency,
                                              const Tensor& features, const SpectralParams& p) {
  p.validate();
  const std::size_t h = part.height(), w = part.width();
  const auto nodes = salient_nodes(part, saliency, features, p.saliency_threshold);
  const std::size_t n = nodes.superpixels.size();

  InstanceSegmentation seg{Tensor(Shape{h, w}), {}, {}};
  if (n == 0) {
    seg.warnings.emplace_back("salient region is empty; returning an all-background segmentation");
    return seg;
  }
  if (n < p.k) throw InstanceCountError(p.k, n);

  const auto graph = build_affinity(nodes.features, nodes.positions, p);
  const auto embedding = smallest_k_eigenvectors(normalized_laplacian(graph), p.k);
  const Matrix rows = normalize_rows(embedding.u);
  const auto km = kmeans(rows, quantile_init(rows, p.k), p.kmeans_max_iters);

  std::vector<std::size_t> cluster_of(part.n_superpixels, 0);
  for (std::size_t i = 0; i < n; ++i) cluster_of[nodes.superpixels[i]] = km.labels[i] + 1;
  for (std::size_t q = 0; q < h * w; ++q) {
    if (saliency[q] < p.saliency_threshold) continue;
    seg.labels[q] = static_cast<double>(cluster_of[static_cast<std::size_t>(part.labels[q])]);
  }
  seg.labels = canonicalize_instance_labels(seg.labels);

  std::vector<double> sum(p.k + 1, 0.0);
  std::vector<std::size_t> count(p.k + 1, 0);
  for (std::size_t q = 0; q < h * w; ++q) {
    const auto l = static_cast<std::size_t>(seg.labels[q]);
    if (l == 0) continue;
    sum[l] += saliency[q];
    ++count[l];
  }
  seg.confidences.resize(p.k);
  for (std::size_t l = 1; l <= p.k; ++l) seg.confidences[l - 1] = count[l] ? sum[l] / static_cast<double>(count[l]) : 0.0;
  return seg;
}

}  // namespace sis
