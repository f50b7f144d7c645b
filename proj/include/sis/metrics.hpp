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
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "sis/tensor.hpp"

namespace sis {

/// Strictly binary [h,w] mask.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Tensor pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rank() != 2) throw ArgumentError("binary mask must be [h,w]");
    for (double v : pixels_.data()) {
      if (v != 0.0 && v != 1.0) throw ArgumentError("binary mask must contain only 0 and 1");
    }
  }

  /// Pixels >= threshold become 1.
  static BinaryMask threshold(const Tensor& map, double t) {
    Tensor out(map.shape());
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = map[i] >= t ? 1.0 : 0.0;
    return BinaryMask(std::move(out));
  }

  /// Pixels of a label map equal to `label`.
  static BinaryMask of_label(const Tensor& labels, double label) {
    Tensor out(labels.shape());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == label ? 1.0 : 0.0;
    return BinaryMask(std::move(out));
  }

  const Tensor& pixels() const noexcept { return pixels_; }
  const Shape& shape() const noexcept { return pixels_.shape(); }
  bool operator[](std::size_t i) const noexcept { return pixels_[i] != 0.0; }
  std::size_t size() const noexcept { return pixels_.size(); }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(pixels_.data().begin(), pixels_.data().end(), 1.0));
  }

 private:
  Tensor pixels_{Shape{0, 0}};
};

namespace metrics_detail {

inline void same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ArgumentError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

inline double f_from_counts(double tp, double fp, double fn, double beta2) {
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double denom = beta2 * precision + recall;
  return denom > 0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

}  // namespace metrics_detail

inline constexpr double kDefaultBeta2 = 0.3;

/// F = (1+β²) P R / (β² P + R), 0 when the denominator vanishes.
inline double f_measure(const BinaryMask& pred, const BinaryMask& gt, double beta2 = kDefaultBeta2) {
  metrics_detail::same_shape(pred.shape(), gt.shape(), "f_measure");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] && gt[i];
    fp += pred[i] && !gt[i];
    fn += !pred[i] && gt[i];
  }
  return metrics_detail::f_from_counts(tp, fp, fn, beta2);
}

/// Maximum F over the 256 thresholds t = i/255, pixel salient iff s >= t.
inline double max_f_measure(const Tensor& saliency, const BinaryMask& gt, double beta2 = kDefaultBeta2) {
  metrics_detail::same_shape(saliency.shape(), gt.shape(), "max_f_measure");
  // Histogram by the highest threshold level each pixel still passes.
  std::vector<double> pos(256, 0.0), neg(256, 0.0);
  double total_pos = 0;
  for (std::size_t i = 0; i < saliency.size(); ++i) {
    const double s = saliency[i];
    int level = -1;
    if (s >= 0.0) {
      level = std::min(255, static_cast<int>(std::floor(s * 255.0)));
      // floor can land one level off near exact multiples of 1/255.
      while (level < 255 && s >= static_cast<double>(level + 1) / 255.0) ++level;
      while (level >= 0 && s < static_cast<double>(level) / 255.0) --level;
    }
    if (gt[i]) ++total_pos;
    if (level < 0) continue;
    (gt[i] ? pos : neg)[static_cast<std::size_t>(level)] += 1.0;
  }
  double best = 0.0, tp = 0.0, fp = 0.0;
  for (int t = 255; t >= 0; --t) {
    tp += pos[static_cast<std::size_t>(t)];
    fp += neg[static_cast<std::size_t>(t)];
    best = std::max(best, metrics_detail::f_from_counts(tp, fp, total_pos - tp, beta2));
  }
  return best;
}

/// Mean absolute difference.
inline double mae(const Tensor& s, const Tensor& g) {
  metrics_detail::same_shape(s.shape(), g.shape(), "mae");
  if (s.size() == 0) throw ArgumentError("mae: empty maps");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += std::abs(s[i] - g[i]);
  return sum / static_cast<double>(s.size());
}

/// |a ∩ b| / |a ∪ b|, 1 when both are empty.
inline double instance_iou(const BinaryMask& a, const BinaryMask& b) {
  metrics_detail::same_shape(a.shape(), b.shape(), "instance_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Overlap statistics between every predicted and ground-truth instance of one image.
struct InstanceOverlap {
  std::vector<double> pred_labels;  // distinct nonzero labels, ascending
  std::vector<double> gt_labels;
  std::vector<std::size_t> pred_area;
  std::vector<std::size_t> gt_area;
  std::vector<std::vector<std::size_t>> inter;  // [pred][gt]

  double iou(std::size_t p, std::size_t g) const {
    const auto u = pred_area[p] + gt_area[g] - inter[p][g];
    return u == 0 ? 1.0 : static_cast<double>(inter[p][g]) / static_cast<double>(u);
  }
  double precision(std::size_t p, std::size_t g) const {
    return pred_area[p] == 0 ? 0.0 : static_cast<double>(inter[p][g]) / static_cast<double>(pred_area[p]);
  }
};

inline InstanceOverlap instance_overlap(const Tensor& pred, const Tensor& gt) {
  metrics_detail::same_shape(pred.shape(), gt.shape(), "instance_overlap");
  InstanceOverlap o;
  std::map<double, std::size_t> pi, gi;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != 0.0) pi.emplace(pred[i], 0);
    if (gt[i] != 0.0) gi.emplace(gt[i], 0);
  }
  for (auto& [label, idx] : pi) {
    idx = o.pred_labels.size();
    o.pred_labels.push_back(label);
  }
  for (auto& [label, idx] : gi) {
    idx = o.gt_labels.size();
    o.gt_labels.push_back(label);
  }
  o.pred_area.assign(pi.size(), 0);
  o.gt_area.assign(gi.size(), 0);
  o.inter.assign(pi.size(), std::vector<std::size_t>(gi.size(), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool hp = pred[i] != 0.0, hg = gt[i] != 0.0;
    if (hp) ++o.pred_area[pi[pred[i]]];
    if (hg) ++o.gt_area[gi[gt[i]]];
    if (hp && hg) ++o.inter[pi[pred[i]]][gi[gt[i]]];
  }
  return o;
}

struct InstanceMatch {
  std::size_t pred;
  std::size_t gt;
  double iou;
};

/// One-to-one greedy matching in descending IoU (ties by pred, then gt
/// index); only pairs with positive overlap are matched.
inline std::vector<InstanceMatch> greedy_match(const InstanceOverlap& o) {
  std::vector<InstanceMatch> pairs;
  for (std::size_t p = 0; p < o.pred_labels.size(); ++p) {
    for (std::size_t g = 0; g < o.gt_labels.size(); ++g) {
      if (o.inter[p][g] > 0) pairs.push_back({p, g, o.iou(p, g)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(o.pred_labels.size()), gt_used(o.gt_labels.size());
  std::vector<InstanceMatch> out;
  for (const auto& m : pairs) {
    if (pred_used[m.pred] || gt_used[m.gt]) continue;
    pred_used[m.pred] = gt_used[m.gt] = true;
    out.push_back(m);
  }
  return out;
}

/// AP^r at IoU threshold tau over a dataset of label maps (0 = background):
/// the sum of pixel precisions of matched predictions with IoU >= tau,
/// divided by the total number of ground-truth instances.
/// With no ground-truth instances the score is 1 if nothing was predicted, else 0.
inline double ap_r(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts, double tau) {
  if (preds.size() != gts.size()) throw ArgumentError("ap_r: prediction and ground-truth lists differ in length");
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("ap_r: tau must lie in (0,1)");
  double sum = 0.0;
  std::size_t total_gt = 0, total_pred = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto o = instance_overlap(preds[i], gts[i]);
    total_gt += o.gt_labels.size();
    total_pred += o.pred_labels.size();
    for (const auto& m : greedy_match(o)) {
      if (m.iou >= tau) sum += o.precision(m.pred, m.gt);
    }
  }
  if (total_gt == 0) return total_pred == 0 ? 1.0 : 0.0;
  return sum / static_cast<double>(total_gt);
}

/// Score-ranked region AP: predictions pooled across images and sorted by
/// confidence; each is a true positive if its best still-unmatched
/// ground truth in the same image has IoU >= tau. Area under the
/// monotone (all-point interpolated) precision/recall curve.
/// `confidences[i][l-1]` scores instance label l of image i.
inline double ap_r_ranked(const std::vector<Tensor>& preds, const std::vector<std::vector<double>>& confidences,
                          const std::vector<Tensor>& gts, double tau) {
  if (preds.size() != gts.size() || preds.size() != confidences.size()) {
    throw ArgumentError("ap_r_ranked: list lengths differ");
  }
  struct Det {
    double score;
    std::size_t image;
    std::size_t pred;
  };
  std::vector<InstanceOverlap> overlaps;
  std::vector<Det> dets;
  std::size_t total_gt = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    overlaps.push_back(instance_overlap(preds[i], gts[i]));
    const auto& o = overlaps.back();
    total_gt += o.gt_labels.size();
    for (std::size_t p = 0; p < o.pred_labels.size(); ++p) {
      const auto l = static_cast<std::size_t>(o.pred_labels[p]);
      const double score = l >= 1 && l <= confidences[i].size() ? confidences[i][l - 1] : 0.0;
      dets.push_back({score, i, p});
    }
  }
  if (total_gt == 0) return dets.empty() ? 1.0 : 0.0;
  std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) used[i].assign(overlaps[i].gt_labels.size(), false);
  std::vector<double> precision, recall;
  double tp = 0, fp = 0;
  for (const auto& d : dets) {
    const auto& o = overlaps[d.image];
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < o.gt_labels.size(); ++g) {
      if (used[d.image][g]) continue;
      const double v = o.iou(d.pred, g);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best >= tau) {
      used[d.image][best_g] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / static_cast<double>(total_gt));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct ImageScores {
  std::string id;
  std::optional<double> max_f;
  std::optional<double> mae;
  std::map<double, double> ap_r;  // per-image AP^r at each tau
};

struct EvalReport {
  double max_f = 0.0;  // mean of per-image maxF
  double mae = 0.0;  // mean of per-image MAE
  std::map<double, double> ap_r;  // dataset-level AP^r per tau
  std::vector<ImageScores> per_image;
};

/// One evaluation record; either pair of maps may be absent.
struct EvalEntry {
  std::string id;
  std::optional<Tensor> saliency;  // [h,w] in [0,1]
  std::optional<Tensor> saliency_gt;  // [h,w] binary
  std::optional<Tensor> instances;  // [h,w] label map
  std::optional<Tensor> instances_gt;  // [h,w] label map
};

inline EvalReport evaluate(const std::vector<EvalEntry>& entries, const std::vector<double>& taus,
                           double beta2 = kDefaultBeta2) {
  EvalReport report;
  std::vector<Tensor> preds, gts;
  double f_sum = 0.0, mae_sum = 0.0;
  std::size_t saliency_count = 0;
  for (const auto& e : entries) {
    ImageScores scores{e.id, std::nullopt, std::nullopt, {}};
    if (e.saliency.has_value() != e.saliency_gt.has_value()) {
      throw ArgumentError("evaluate: '" + e.id + "' needs both saliency and saliency ground truth");
    }
    if (e.instances.has_value() != e.instances_gt.has_value()) {
      throw ArgumentError("evaluate: '" + e.id + "' needs both instance prediction and ground truth");
    }
    if (e.saliency) {
      const auto gt = BinaryMask::threshold(*e.saliency_gt, 0.5);
      scores.max_f = max_f_measure(*e.saliency, gt, beta2);
      scores.mae = mae(*e.saliency, *e.saliency_gt);
      f_sum += *scores.max_f;
      mae_sum += *scores.mae;
      ++saliency_count;
    }
    if (e.instances) {
      for (double tau : taus) scores.ap_r[tau] = ap_r({*e.instances}, {*e.instances_gt}, tau);
      preds.push_back(*e.instances);
      gts.push_back(*e.instances_gt);
    }
    report.per_image.push_back(std::move(scores));
  }
  if (saliency_count) {
    report.max_f = f_sum / static_cast<double>(saliency_count);
    report.mae = mae_sum / static_cast<double>(saliency_count);
  }
  if (!preds.empty()) {
    for (double tau : taus) report.ap_r[tau] = ap_r(preds, gts, tau);
  }
  return report;
}

}  // namespace sis
