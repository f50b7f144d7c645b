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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sis/spectral.hpp"

namespace sis {
namespace {

AffinityGraph graph_of(const Matrix& w) {
  AffinityGraph g{w, std::vector<double>(w.rows(), 0.0)};
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) g.degrees[i] += w(i, j);
  }
  return g;
}

Matrix column(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

TEST(Affinity, ZeroDistancesGiveOne) {
  const auto g = build_affinity(Matrix{{1, 2}, {1, 2}}, Matrix{{0.5, 0.5}, {0.5, 0.5}}, SpectralParams{});
  EXPECT_EQ(g.w(0, 1), 1.0);
  EXPECT_EQ(g.degrees, (std::vector<double>{2, 2}));
}

TEST(Affinity, HandValue) {
  // exp(-10 / 10) / (1 + 3 * 1) = e^-1 / 4.
  const auto g = build_affinity(Matrix{{0}, {10}}, Matrix{{0, 0}, {1, 0}}, SpectralParams{});
  EXPECT_NEAR(g.w(0, 1), std::exp(-1.0) / 4.0, 1e-12);
  EXPECT_NEAR(g.w(0, 1), 0.091970, 1e-6);
}

TEST(Affinity, DecaysWithFeatureDistance) {
  double prev = 2.0;
  for (double d : {0.0, 1.0, 5.0, 20.0, 100.0, 1000.0}) {
    const double w = build_affinity(Matrix{{0}, {d}}, Matrix{{0, 0}, {0, 0}}, SpectralParams{}).w(0, 1);
    EXPECT_LT(w, prev);
    prev = w;
  }
  EXPECT_LT(prev, 1e-40);
}

TEST(Affinity, SymmetricUnitDiagonal) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> u(0, 5);
  Matrix f(7, 3), p(7, 2);
  for (std::size_t r = 0; r < 7; ++r) {
    for (auto& v : f.row(r)) v = u(rng);
    for (auto& v : p.row(r)) v = u(rng);
  }
  const auto g = build_affinity(f, p, SpectralParams{});
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(g.w(i, i), 1.0);
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(g.w(i, j), g.w(j, i));
  }
}

TEST(Laplacian, TwoNodeHandCase) {
  const auto l = normalized_laplacian(graph_of(Matrix{{1, 1}, {1, 1}}));
  const Matrix expected{{0.5, -0.5}, {-0.5, 0.5}};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(l.data()[i], expected.data()[i], 1e-15);
  const auto e = smallest_k_eigenvectors(l, 2);
  EXPECT_NEAR(e.eigenvalues[0], 0.0, 1e-15);
  EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-15);
}

TEST(Laplacian, ConnectedGraphNullVector) {
  std::mt19937_64 rng(42);
  const auto g = graph_of(oracle::random_affinity(rng, 6));
  const auto e = smallest_k_eigenvectors(normalized_laplacian(g), 1);
  EXPECT_LE(std::abs(e.eigenvalues[0]), 1e-12);
  double norm = 0.0;
  for (double d : g.degrees) norm += d;
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(e.u(i, 0), std::sqrt(g.degrees[i] / norm), 1e-10);
}

TEST(Laplacian, TwoComponentsDoubleZero) {
  Matrix w(4, 4);
  w(0, 0) = w(1, 1) = w(2, 2) = w(3, 3) = 1.0;
  w(0, 1) = w(1, 0) = 0.3;
  w(2, 3) = w(3, 2) = 0.7;
  const auto e = smallest_k_eigenvectors(normalized_laplacian(graph_of(w)), 3);
  EXPECT_LE(std::abs(e.eigenvalues[0]), 1e-14);
  EXPECT_LE(std::abs(e.eigenvalues[1]), 1e-14);
  EXPECT_GT(e.eigenvalues[2], 0.1);
}

TEST(Laplacian, ZeroDegreeRejected) {
  AffinityGraph g{Matrix(2, 2), {0.0, 1.0}};
  EXPECT_THROW(normalized_laplacian(g), ArgumentError);
}

TEST(Eigen, IdentityAndDiagonal) {
  const auto id = smallest_k_eigenvectors(Matrix::identity(3), 2);
  EXPECT_EQ(id.eigenvalues, (std::vector<double>{1, 1}));
  EXPECT_EQ(id.u, (Matrix{{1, 0}, {0, 1}, {0, 0}}));

  const auto d = smallest_k_eigenvectors(Matrix{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}, 2);
  EXPECT_EQ(d.eigenvalues, (std::vector<double>{1, 2}));
  EXPECT_EQ(d.u, (Matrix{{0, 0}, {1, 0}, {0, 1}}));
}

TEST(Eigen, MatchesBisectionOracle) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
    }
    const auto e = jacobi_eigen(m);
    const auto ref = oracle::bisection_eigenvalues(m);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(e.values[j], ref[j], 1e-8);

    // Residuals and orthonormality.
    for (std::size_t j = 0; j < n; ++j) {
      double res = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double s = -e.values[j] * e.vectors(r, j);
        for (std::size_t c = 0; c < n; ++c) s += m(r, c) * e.vectors(c, j);
        res += s * s;
      }
      EXPECT_LE(std::sqrt(res), 1e-8);
      for (std::size_t k = 0; k < n; ++k) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += e.vectors(r, j) * e.vectors(r, k);
        EXPECT_NEAR(dot, j == k ? 1.0 : 0.0, 1e-8);
      }
    }
  }
}

TEST(Eigen, SignConvention) {
  const auto e = jacobi_eigen(Matrix{{2, -1}, {-1, 2}});
  for (std::size_t j = 0; j < 2; ++j) {
    const double a = e.vectors(0, j), b = e.vectors(1, j);
    EXPECT_GT(std::abs(a) >= std::abs(b) ? a : b, 0.0);
  }
}

TEST(Eigen, AsymmetricRejected) { EXPECT_THROW(smallest_k_eigenvectors(Matrix{{1, 2}, {0, 1}}, 1), ArgumentError); }

TEST(Quantile, FractilePercentages) {
  EXPECT_EQ(fractile_percentages(4), (std::vector<double>{12.5, 37.5, 62.5, 87.5}));
  EXPECT_EQ(fractile_percentages(1), (std::vector<double>{50.0}));
}

TEST(Quantile, SelectedRowsForEightPoints) {
  EXPECT_EQ(fractile_positions(8, 4), (std::vector<std::size_t>{1, 3, 5, 7}));
  const auto c = quantile_init(column({5, 3, 8, 1, 7, 2, 6, 4}), 4);
  EXPECT_EQ(c, column({2, 4, 6, 8}));
}

TEST(Quantile, SingleCentreAtMedian) {
  EXPECT_EQ(fractile_positions(7, 1), std::vector<std::size_t>{3});
  EXPECT_EQ(quantile_init(column({9, 1, 5, 3, 7, 2, 8}), 1), column({5}));
}

TEST(Quantile, TiesBrokenByRowIndex) {
  const Matrix u{{1, 10}, {0, 20}, {1, 30}, {0, 40}};
  // Sorted order: rows 1, 3, 0, 2; k = 2 picks positions 1 and 3.
  EXPECT_EQ(quantile_init(u, 2), (Matrix{{0, 40}, {1, 30}}));
  EXPECT_THROW(quantile_init(u, 5), ArgumentError);
}

TEST(KMeans, FourPointHandCase) {
  const auto pts = column({0, 0.1, 10, 10.1});
  const auto r = kmeans(pts, quantile_init(pts, 2));
  EXPECT_EQ(r.labels, (std::vector<std::size_t>{0, 0, 1, 1}));
  EXPECT_NEAR(r.inertia, oracle::exhaustive_wcss({0, 0.1, 10, 10.1}, 2), 1e-12);
}

TEST(KMeans, SeparatedBallsConvergeInOneStep) {
  const Matrix pts{{0, 0}, {0.1, 0}, {0, 0.1}, {5, 5}, {5.1, 5}, {5, 5.1}};
  const auto r = kmeans(pts, Matrix{{0, 0}, {5, 5}});
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.labels, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(r.centers(0, 0), 0.1 / 3, 1e-15);
  EXPECT_NEAR(r.centers(1, 1), 15.1 / 3, 1e-15);
}

TEST(KMeans, KEqualsN) {
  const auto pts = column({4, 1, 3, 2});
  const auto r = kmeans(pts, quantile_init(pts, 4));
  std::vector<bool> used(4);
  for (auto l : r.labels) used[l] = true;
  EXPECT_EQ(std::count(used.begin(), used.end(), true), 4);
  EXPECT_EQ(r.inertia, 0.0);
}

TEST(KMeans, CoincidentCentresSeparated) {
  const auto pts = column({0, 0, 0, 1, 1, 1});
  const auto r = kmeans(pts, column({0, 0}));
  EXPECT_EQ(r.labels, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
}

TEST(KMeans, EmptyClusterReseeded) {
  // Centre 2 starts far away and captures nothing.
  const auto pts = column({0, 0.2, 0.4, 5, 5.2});
  const auto r = kmeans(pts, column({0.2, 5.1, 100}));
  std::vector<std::size_t> counts(3);
  for (auto l : r.labels) ++counts[l];
  for (auto c : counts) EXPECT_GT(c, 0u);
}

TEST(KMeans, WellSeparatedOneDimensionalMatchesExhaustive) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 3, per = 1 + rng() % 4;
    std::vector<double> x;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < per; ++i) x.push_back(20.0 * double(c) + jitter(rng));
    }
    std::shuffle(x.begin(), x.end(), rng);
    const auto r = kmeans(column(x), quantile_init(column(x), k));
    EXPECT_NEAR(oracle::wcss(x, r.labels, k), oracle::exhaustive_wcss(x, k), 1e-9);
  }
}

TEST(KMeans, BitwiseRerunIdentity) {
  std::mt19937_64 rng(45);
  std::normal_distribution<double> u(0, 1);
  Matrix pts(30, 3);
  for (std::size_t r = 0; r < 30; ++r) {
    for (auto& v : pts.row(r)) v = u(rng);
  }
  const auto a = kmeans(pts, quantile_init(pts, 3));
  const auto b = kmeans(pts, quantile_init(pts, 3));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centers, b.centers);
}

TEST(Canonicalize, FirstAppearanceOrder) {
  const Tensor t(Shape{1, 6}, std::vector<double>{0, 3, 3, 1, 0, 2});
  EXPECT_EQ(canonicalize_instance_labels(t).values(), (std::vector<double>{0, 1, 1, 2, 0, 3}));
}

// Ten 2x2 superpixels in a 2x20 strip; saliency/features set per block.
struct Strip {
  SuperpixelPartition part;
  Tensor saliency{Shape{2, 20}};
  Tensor features{Shape{2, 20, 1}};
};

Strip strip(const std::vector<double>& block_feature, const std::vector<double>& block_saliency) {
  Strip s;
  Tensor labels(Shape{2, 20});
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t x = 0; x < 20; ++x) {
      labels.at(y, x) = double(x / 2);
      s.saliency.at(y, x) = block_saliency[x / 2];
      s.features.at(y, x, 0) = block_feature[x / 2];
    }
  }
  s.part = make_partition(labels, Tensor(Shape{2, 20, 3}));
  return s;
}

TEST(ClusterInstances, SingleCluster) {
  const auto s = strip({0, 0, 50, 50, 50, 0, 0, 0, 0, 0}, {0, 0, 1, 1, 0.8, 0, 0, 0, 0, 0});
  SpectralParams p;
  p.k = 1;
  const auto seg = cluster_instances(s.part, s.saliency, s.features, p);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(seg.labels[i], s.saliency[i] >= 0.5 ? 1.0 : 0.0);
  EXPECT_NEAR(seg.confidences[0], (1 + 1 + 0.8) / 3, 1e-12);
}

TEST(ClusterInstances, TwoFeatureGroups) {
  const auto s = strip({0, 200, 200, 0, 0, 0, 90, 90, 90, 0}, {0, 1, 1, 0, 0, 0, 1, 1, 1, 0});
  SpectralParams p;
  p.k = 2;
  const auto seg = cluster_instances(s.part, s.saliency, s.features, p);
  for (std::size_t x = 0; x < 20; ++x) {
    const double expect = (x >= 2 && x < 6) ? 1.0 : (x >= 12 && x < 18) ? 2.0 : 0.0;
    EXPECT_EQ(seg.labels.at(0, x), expect) << x;
    EXPECT_EQ(seg.labels.at(1, x), expect) << x;
  }
  const auto again = cluster_instances(s.part, s.saliency, s.features, p);
  EXPECT_EQ(again.labels, seg.labels);
}

TEST(ClusterInstances, InfeasibleK) {
  const auto s = strip({0, 1, 2, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 1, 0, 0, 0, 0, 0, 0, 0});
  SpectralParams p;
  p.k = 3;
  try {
    cluster_instances(s.part, s.saliency, s.features, p);
    FAIL() << "expected InstanceCountError";
  } catch (const InstanceCountError& e) {
    EXPECT_EQ(e.feasible_max(), 2u);
  }
}

TEST(ClusterInstances, EmptySalientRegion) {
  const auto s = strip(std::vector<double>(10, 0.0), std::vector<double>(10, 0.1));
  SpectralParams p;
  p.k = 2;
  const auto seg = cluster_instances(s.part, s.saliency, s.features, p);
  for (double v : seg.labels.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(seg.warnings.size(), 1u);
}

}  // namespace
}  // namespace sis
