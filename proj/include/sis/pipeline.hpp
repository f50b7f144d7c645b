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

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "sis/crf.hpp"
#include "sis/resize.hpp"
#include "sis/slic.hpp"
#include "sis/spectral.hpp"
#include "sis/tensor.hpp"

namespace sis {

struct PipelineConfig {
  std::size_t n_superpixels = 250;
  double compactness = 10.0;
  std::size_t slic_iters = 10;
  double lambda = 3.0;
  double sigma2 = 10.0;
  CrfParams crf;  // 30, 30, 61, 13, 1; 10 iterations
  double saliency_threshold = 0.5;
  std::size_t kmeans_max_iters = 100;
  bool refine_crf = false;
  std::optional<std::size_t> k_override;

  SpectralParams spectral(std::size_t k) const {
    return {lambda, sigma2, k, saliency_threshold, kmeans_max_iters};
  }
};

struct StageTiming {
  std::string stage;
  double milliseconds;
};

struct PipelineResult {
  InstanceSegmentation segmentation;
  SuperpixelPartition partition;
  Tensor saliency;  // the map actually clustered (after resize and optional CRF)
  std::vector<StageTiming> timings;
};

namespace pipeline_detail {

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTiming>& out) : out_(out) {}
  void lap(std::string stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.push_back({std::move(stage), std::chrono::duration<double, std::milli>(now - last_).count()});
    last_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace pipeline_detail

/// Pixels below the saliency threshold are painted black.
inline Tensor mask_background(const Tensor& image, const Tensor& saliency, double threshold) {
  Tensor out = image;
  const std::size_t c = image.dim(2);
  for (std::size_t p = 0; p < saliency.size(); ++p) {
    if (saliency[p] < threshold) std::fill_n(&out[p * c], c, 0.0);
  }
  return out;
}

/// Full salient instance clustering for one image.
///
/// `image` is [h,w,3] RGB in [0,1]; `saliency` is [h',w'] in [0,1] and
/// `features` [h'',w'',c]. Saliency and features are resized bilinearly to
/// the image grid when their shapes differ. With `config.refine_crf` the
/// saliency map is first refined by mean-field inference. The image is then
/// masked by the saliency map, segmented into superpixels, and clustered
/// into k instances (k_override wins over the argument when set).
inline PipelineResult run_pipeline(const Tensor& image, const Tensor& saliency, const Tensor& features, std::size_t k,
                                   const PipelineConfig& config) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ArgumentError("pipeline: image must be [h,w,3]");
  if (saliency.rank() != 2) throw ArgumentError("pipeline: saliency must be [h,w]");
  if (features.rank() != 3) throw ArgumentError("pipeline: features must be [h,w,c]");
  const std::size_t h = image.dim(0), w = image.dim(1);
  const std::size_t instances = config.k_override.value_or(k);
  const auto params = config.spectral(instances);
  params.validate();

  PipelineResult result;
  pipeline_detail::Stopwatch clock(result.timings);
  result.saliency = resize_bilinear(saliency, h, w);
  const Tensor feats = resize_bilinear(features, h, w);
  clock.lap("resize");

  if (config.refine_crf) {
    result.saliency = mean_field_refine(UnaryField::from_saliency(result.saliency), image, config.crf).saliency();
    clock.lap("crf");
  }

  const Tensor lab = rgb_to_lab(mask_background(image, result.saliency, config.saliency_threshold));
  const std::size_t n = std::min(config.n_superpixels, h * w);
  result.partition = slic_segment(lab, n, config.compactness, config.slic_iters);
  clock.lap("slic");

  result.segmentation = cluster_instances(result.partition, result.saliency, feats, params);
  clock.lap("cluster");
  return result;
}

}  // namespace sis
