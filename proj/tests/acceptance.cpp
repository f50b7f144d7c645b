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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Tolerances are pinned below.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sis/sis.hpp"

namespace sis {
namespace {

constexpr double kAffinityTol = 1e-12;
constexpr double kEigenTol = 1e-8;
constexpr double kNullEigenTol = 1e-9;
constexpr double kMarginalTol = 1e-9;
constexpr double kEnumeratorTol = 1e-9;
constexpr double kFiniteDiffTol = 1e-6;
constexpr double kLn2Tol = 1e-12;
constexpr double kFMeasureTol = 1e-6;
constexpr double kSecondsPerImage = 2.0;
// |1 - 0.8| is not the double 0.2; the correctly rounded mean is one ulp below it.
constexpr double kMaeTol = 3e-17;

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

Tensor random_tensor(std::mt19937_64& rng, const Shape& shape, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Synthetic fixtures through the whole pipeline.
Outcome criterion1() {
  Outcome o;
  std::vector<Tensor> preds, gts;
  double slowest = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    SynthSpec spec;
    spec.count = 1 + i % 4;
    spec.seed = 1000 + i;
    const auto f = synth_fixture(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_pipeline(image_to_tensor(f.image), f.saliency, f.features, f.k(), PipelineConfig{});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    slowest = std::max(slowest, secs);
    preds.push_back(r.segmentation.labels);
    gts.push_back(f.ground_truth);
  }
  const double ap5 = ap_r(preds, gts, 0.5), ap7 = ap_r(preds, gts, 0.7);
  o.require(ap5 == 1.0, "AP@0.5 below 1");
  o.require(ap7 >= 0.95, "AP@0.7 below 0.95");
  o.require(slowest < kSecondsPerImage, "an image exceeded the time budget");
  o.detail << (o.ok ? "" : "; ") << "AP@0.5=" << ap5 << " AP@0.7=" << ap7 << " slowest=" << slowest << "s";
  return o;
}

AffinityGraph graph_of(const Matrix& w) {
  AffinityGraph g{w, std::vector<double>(w.rows(), 0.0)};
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) g.degrees[i] += w(i, j);
  }
  return g;
}

// Affinity hand value and Laplacian spectra against the bisection oracle.
Outcome criterion2() {
  Outcome o;
  const auto g = build_affinity(Matrix{{0}, {10}}, Matrix{{0, 0}, {1, 0}}, SpectralParams{});
  const double hand = g.w(0, 1);
  o.require(std::abs(hand - std::exp(-1.0) / 4.0) <= kAffinityTol, "affinity hand value");

  std::mt19937_64 rng(2002);
  double worst = 0.0, worst_null = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    const auto lap = normalized_laplacian(graph_of(oracle::random_affinity(rng, n)));
    const auto e = jacobi_eigen(lap);
    const auto ref = oracle::bisection_eigenvalues(lap);
    for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(e.values[j] - ref[j]));
    worst_null = std::max(worst_null, std::abs(e.values[0]));
  }
  o.require(worst <= kEigenTol, "eigenvalues disagree with the oracle");
  o.require(worst_null <= kNullEigenTol, "smallest eigenvalue of a connected graph is not zero");
  o.detail << (o.ok ? "" : "; ") << "w=" << hand << " max|dlambda|=" << worst << " max|lambda0|=" << worst_null;
  return o;
}

// Fractile positions, 1-D k-means against the exhaustive optimum, rerun identity.
Outcome criterion3() {
  Outcome o;
  o.require(fractile_percentages(4) == std::vector<double>{12.5, 37.5, 62.5, 87.5}, "fractiles for k=4");

  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> u(-10, 10);
  std::size_t instances = 0, misses = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, n); ++k) {
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(n);
        Matrix pts(n, 1);
        for (std::size_t i = 0; i < n; ++i) pts(i, 0) = x[i] = u(rng);
        const auto r = kmeans(pts, quantile_init(pts, k));
        const double got = oracle::wcss(x, r.labels, k), best = oracle::exhaustive_wcss(x, k);
        ++instances;
        if (got > best + 1e-9 * std::max(1.0, best)) ++misses;
      }
    }
  }
  o.require(misses == 0, "k-means missed the exhaustive optimum on " + std::to_string(misses) + "/" +
                             std::to_string(instances) + " instances");

  SynthSpec spec;
  spec.count = 4;
  spec.seed = 3004;
  const auto f = synth_fixture(spec);
  const auto img = image_to_tensor(f.image);
  const auto a = run_pipeline(img, f.saliency, f.features, 4, PipelineConfig{});
  const auto b = run_pipeline(img, f.saliency, f.features, 4, PipelineConfig{});
  o.require(write_npy(a.segmentation.labels) == write_npy(b.segmentation.labels) &&
                a.segmentation.confidences == b.segmentation.confidences,
            "rerun differs");
  o.detail << (o.ok ? "" : "; ") << instances << " instances, " << misses << " misses";
  return o;
}

struct Field {
  UnaryField unary;
  Tensor img;
  oracle::CrfSetup setup;
};

Field random_field(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  const auto sal = random_tensor(rng, Shape{h, w}, 0, 1);
  const auto img = random_tensor(rng, Shape{h, w, 3}, 0, 1);
  return {UnaryField::from_saliency(sal), img, {h, w, sal.values(), img.values()}};
}

std::vector<int> as_ints(const Tensor& labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = int(labels[i]);
  return out;
}

// Dense CRF kernel, mean-field invariants, and energy decrease.
Outcome criterion4() {
  Outcome o;
  const std::array<double, 2> p{3, 4};
  const std::array<double, 3> c{10, 20, 30};
  o.require(pairwise_kernel(p, p, c, c, CrfParams{}) == 60.0, "kernel at zero distance");

  std::mt19937_64 rng(4004);
  double worst_sum = 0.0;
  const auto f = random_field(rng, 9, 11);
  mean_field_refine(f.unary, f.img, CrfParams{}, [&](std::size_t, const UnaryField& q) {
    for (std::size_t i = 0; i < q.probs.size(); i += 2) {
      worst_sum = std::max(worst_sum, std::abs(q.probs[i] + q.probs[i + 1] - 1.0));
    }
  });
  o.require(worst_sum <= kMarginalTol, "marginals do not sum to 1");

  CrfParams off;
  off.w1 = off.w2 = 0.0;
  o.require(mean_field_refine(f.unary, f.img, off).probs == f.unary.probs, "zero weights change the field");

  int better = 0, enumerated = 0;
  double worst_energy = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto r = random_field(rng, 1 + rng() % 12, 1 + rng() % 12);
    const auto q = binarize(mean_field_refine(r.unary, r.img, CrfParams{}), 0.5);
    Tensor argmax(Shape{r.unary.height(), r.unary.width()});
    for (std::size_t i = 0; i < argmax.size(); ++i) {
      argmax[i] = r.unary.probs[2 * i + 1] > r.unary.probs[2 * i] ? 1.0 : 0.0;
    }
    double e_map, e_unary;
    if (argmax.size() <= 16) {
      ++enumerated;
      e_map = oracle::crf_energy(r.setup, as_ints(q));
      e_unary = oracle::crf_energy(r.setup, as_ints(argmax));
      worst_energy = std::max(worst_energy, std::abs(e_map - crf_energy(q, r.unary, r.img, CrfParams{})));
    } else {
      e_map = crf_energy(q, r.unary, r.img, CrfParams{});
      e_unary = crf_energy(argmax, r.unary, r.img, CrfParams{});
    }
    better += e_map <= e_unary;
  }
  o.require(better >= 95, "mean field lowered energy on fewer than 95 of 100 fields");
  o.require(worst_energy <= kEnumeratorTol, "energy disagrees with the enumerator");
  o.detail << (o.ok ? "" : "; ") << "max|sum-1|=" << worst_sum << " lowered " << better << "/100 (" << enumerated
           << " enumerated)";
  return o;
}

DenseLayerParams random_layer(std::mt19937_64& rng, std::size_t c, std::size_t g) {
  std::uniform_real_distribution<double> u(-1, 1), pos(0.5, 2);
  DenseLayerParams p;
  for (std::size_t i = 0; i < c; ++i) {
    p.bn_gamma.push_back(u(rng));
    p.bn_beta.push_back(u(rng));
    p.bn_mean.push_back(u(rng));
    p.bn_var.push_back(pos(rng));
  }
  p.conv_kernel = random_tensor(rng, Shape{3, 3, c, g});
  return p;
}

// Squeeze-excitation, dense-block shapes, weighted cross-entropy.
Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(5005);
  std::normal_distribution<double> wide(0, 20);
  bool gate_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t ch = 16 * (1 + rng() % 4);
    Tensor x(Shape{1 + rng() % 4, 1 + rng() % 4, ch});
    for (auto& v : x.data()) v = wide(rng);
    SeParams p = SeParams::zeros(ch);
    for (auto* m : {&p.w1, &p.w2}) {
      for (std::size_t r = 0; r < m->rows(); ++r) {
        for (auto& v : m->row(r)) v = wide(rng);
      }
    }
    for (auto& v : p.b1) v = wide(rng);
    for (auto& v : p.b2) v = wide(rng);
    for (double g : se_gate(x, p)) gate_ok = gate_ok && g > 0.0 && g < 1.0;
  }
  o.require(gate_ok, "gate left (0,1)");

  const auto x = random_tensor(rng, Shape{3, 4, 32});
  const auto y = se_forward(x, SeParams::zeros(32));
  bool half = true;
  for (std::size_t i = 0; i < x.size(); ++i) half = half && y[i] == 0.5 * x[i];
  o.require(half, "zero weights do not halve the input");

  bool channels = true;
  for (int t = 0; t < 20; ++t) {
    const std::size_t c0 = 1 + rng() % 6, g = 1 + rng() % 8, layers_n = rng() % 6;
    std::vector<DenseLayerParams> layers;
    for (std::size_t l = 0; l < layers_n; ++l) layers.push_back(random_layer(rng, c0 + l * g, g));
    const auto out = dense_block_forward(random_tensor(rng, Shape{3, 2, c0}), layers);
    channels = channels && out.dim(2) == c0 + layers_n * g;
  }
  o.require(channels, "dense block channel count");

  double worst_fd = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 1 + rng() % 5, c = 2 + rng() % 4;
    const auto yhat = random_tensor(rng, Shape{n, c}, 0.05, 1.0);
    Tensor onehot(Shape{n, c});
    for (std::size_t i = 0; i < n; ++i) onehot.at(i, rng() % c) = 1.0;
    std::vector<double> weights(c);
    for (auto& w : weights) w = 0.5 + double(rng() % 100) / 50.0;
    CrossEntropyOptions opts;
    opts.require_normalized = false;
    const auto loss = [&](const Tensor& p) { return weighted_cross_entropy(p, onehot, weights, opts).loss; };
    const auto grad = [&](const Tensor& p) { return weighted_cross_entropy(p, onehot, weights, opts).gradient; };
    worst_fd = std::max(worst_fd, finite_diff_check(loss, grad, yhat));
  }
  o.require(worst_fd <= kFiniteDiffTol, "gradient disagrees with central differences");

  const double uniform =
      weighted_cross_entropy(Tensor(Shape{4, 2}, 0.5), Tensor(Shape{4, 2}, std::vector<double>{1, 0, 0, 1, 1, 0, 0, 1}))
          .loss;
  o.require(std::abs(uniform - std::log(2.0)) <= kLn2Tol, "uniform loss is not ln 2");
  o.detail << (o.ok ? "" : "; ") << "max fd error=" << worst_fd << " uniform loss=" << uniform;
  return o;
}

Tensor strip(std::size_t len, std::size_t from, std::size_t to) {
  Tensor t(Shape{1, len});
  for (std::size_t x = from; x < to; ++x) t[x] = 1.0;
  return t;
}

// Saliency and instance metrics.
Outcome criterion6() {
  Outcome o;
  const double f = f_measure(BinaryMask(strip(100, 16, 46)), BinaryMask(strip(100, 0, 40)), 0.3);
  o.require(std::abs(f - 0.742857) <= kFMeasureTol, "F-measure hand case");

  const double m =
      mae(Tensor(Shape{1, 2}, std::vector<double>{0.2, 0.8}), Tensor(Shape{1, 2}, std::vector<double>{0, 1}));
  o.require(std::abs(m - 0.2) <= kMaeTol, "MAE hand case");

  const double ap = ap_r({strip(140, 20, 120)}, {strip(140, 0, 100)}, 0.5);
  o.require(ap == 0.8, "AP hand case");

  std::mt19937_64 rng(6006);
  bool monotone = true;
  for (int t = 0; t < 20; ++t) {
    std::vector<Tensor> preds, gts;
    for (int i = 0; i < 3; ++i) {
      Tensor g(Shape{4, 8});
      for (auto& v : g.data()) v = double(rng() % 3);
      Tensor p = g;
      for (auto& v : p.data()) {
        if (rng() % 4 == 0) v = double(rng() % 3);
      }
      gts.push_back(g);
      preds.push_back(p);
    }
    double prev = 2.0;
    for (double tau : {0.5, 0.6, 0.7, 0.8, 0.9}) {
      const double v = ap_r(preds, gts, tau);
      monotone = monotone && v <= prev;
      prev = v;
    }
  }
  o.require(monotone, "AP increased with tau");
  char buf[96];
  std::snprintf(buf, sizeof buf, "F=%.6f MAE=%.17g AP=%g", f, m, ap);
  o.detail << (o.ok ? "" : "; ") << buf;
  return o;
}

// NPY and PNM roundtrips.
Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(7007);
  std::normal_distribution<double> nd(0, 1e3);
  std::size_t failures = 0;
  for (int t = 0; t < 100; ++t) {
    Shape shape(rng() % 5);
    for (auto& d : shape) d = rng() % 5;
    Tensor x(shape);
    for (auto& v : x.data()) v = rng() % 10 == 0 ? double(rng() % 7) - 3.0 : nd(rng);
    const auto bytes = write_npy(x);
    const auto back = read_npy(bytes);
    failures += !(back == x && write_npy(back) == bytes);
  }
  for (int t = 0; t < 100; ++t) {
    ImageBuffer img;
    img.height = 1 + rng() % 17;
    img.width = 1 + rng() % 17;
    img.channels = rng() % 2 ? 3 : 1;
    img.maxval = rng() % 2 ? 255 : 65535;
    img.samples.resize(img.height * img.width * img.channels);
    for (auto& s : img.samples) s = std::uint16_t(rng() % (std::size_t(img.maxval) + 1));
    const auto bytes = write_pnm(img);
    const auto back = read_pnm(bytes);
    failures += !(back == img && write_pnm(back) == bytes);
  }
  o.require(failures == 0, std::to_string(failures) + " roundtrips differ");
  o.detail << (o.ok ? "" : "; ") << "200 files";
  return o;
}

}  // namespace
}  // namespace sis

int main() {
  using Criterion = sis::Outcome (*)();
  const Criterion criteria[] = {sis::criterion1, sis::criterion2, sis::criterion3, sis::criterion4,
                                sis::criterion5, sis::criterion6, sis::criterion7};
  int failed = 0;
  for (int i = 0; i < 7; ++i) {
    bool ok = false;
    std::string detail;
    try {
      auto o = criteria[i]();
      ok = o.ok;
      detail = o.detail.str();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failed += !ok;
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", i + 1, detail.c_str());
  }
  return failed == 0 ? 0 : 1;
}
