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

// JSON bindings: pipeline configuration, instance-count sidecars, the
// netblock parameter manifest, and evaluation reports.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sis/io.hpp"
#include "sis/metrics.hpp"
#include "sis/netblocks.hpp"
#include "sis/npy.hpp"
#include "sis/pipeline.hpp"

namespace sis {

using Json = nlohmann::json;

inline Json parse_json_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace config_detail {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace config_detail

/// Overlays the keys present in `j` onto `cfg`. Unknown keys are rejected.
inline void apply_config_json(const Json& j, PipelineConfig& cfg) {
  using config_detail::read_if;
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  static const std::vector<std::string> known = {"n_superpixels", "compactness", "slic_iters", "lambda",
                                                 "sigma2", "crf", "saliency_threshold", "kmeans_max_iters",
                                                 "refine_crf", "k_override"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw FormatError("unknown config key '" + key + "'");
  }
  read_if(j, "n_superpixels", cfg.n_superpixels);
  read_if(j, "compactness", cfg.compactness);
  read_if(j, "slic_iters", cfg.slic_iters);
  read_if(j, "lambda", cfg.lambda);
  read_if(j, "sigma2", cfg.sigma2);
  read_if(j, "saliency_threshold", cfg.saliency_threshold);
  read_if(j, "kmeans_max_iters", cfg.kmeans_max_iters);
  read_if(j, "refine_crf", cfg.refine_crf);
  if (j.contains("k_override") && !j.at("k_override").is_null()) {
    std::size_t k = 0;
    read_if(j, "k_override", k);
    cfg.k_override = k;
  }
  if (j.contains("crf")) {
    const auto& c = j.at("crf");
    if (!c.is_object()) throw FormatError("config key 'crf' must be an object");
    read_if(c, "w1", cfg.crf.w1);
    read_if(c, "w2", cfg.crf.w2);
    read_if(c, "theta_alpha", cfg.crf.theta_alpha);
    read_if(c, "theta_beta", cfg.crf.theta_beta);
    read_if(c, "theta_gamma", cfg.crf.theta_gamma);
    read_if(c, "iters", cfg.crf.iters);
    read_if(c, "max_side", cfg.crf.max_side);
  }
}

inline Json config_to_json(const PipelineConfig& cfg) {
  return Json{{"n_superpixels", cfg.n_superpixels},
              {"compactness", cfg.compactness},
              {"slic_iters", cfg.slic_iters},
              {"lambda", cfg.lambda},
              {"sigma2", cfg.sigma2},
              {"saliency_threshold", cfg.saliency_threshold},
              {"kmeans_max_iters", cfg.kmeans_max_iters},
              {"refine_crf", cfg.refine_crf},
              {"k_override", cfg.k_override ? Json(*cfg.k_override) : Json(nullptr)},
              {"crf",
               {{"w1", cfg.crf.w1},
                {"w2", cfg.crf.w2},
                {"theta_alpha", cfg.crf.theta_alpha},
                {"theta_beta", cfg.crf.theta_beta},
                {"theta_gamma", cfg.crf.theta_gamma},
                {"iters", cfg.crf.iters},
                {"max_side", cfg.crf.max_side}}}};
}

/// Instance count from a subitizing sidecar: {"k": 3} or {"subitizing": 1|2|3|"4+"}.
/// The open-ended class "4+" maps to `four_plus` (4 by default).
inline std::size_t parse_k_sidecar(const Json& j, std::size_t four_plus = 4) {
  const auto as_count = [&](const Json& v) -> std::size_t {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() > 0)) {
      const auto k = v.get<std::size_t>();
      if (k >= 1) return k;
    }
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "4+") return four_plus;
      if (s == "1" || s == "2" || s == "3") return static_cast<std::size_t>(s[0] - '0');
    }
    throw FormatError("k sidecar: instance count must be a positive integer or \"4+\"");
  };
  if (!j.is_object()) throw FormatError("k sidecar must be a JSON object");
  if (j.contains("k")) return as_count(j.at("k"));
  if (j.contains("subitizing")) return as_count(j.at("subitizing"));
  throw FormatError("k sidecar: expected key 'k' or 'subitizing'");
}

inline Json segmentation_sidecar(const InstanceSegmentation& seg) {
  Json inst = Json::array();
  for (std::size_t i = 0; i < seg.confidences.size(); ++i) {
    std::size_t area = 0;
    for (double v : seg.labels.data()) area += v == static_cast<double>(i + 1);
    inst.push_back({{"label", i + 1}, {"confidence", seg.confidences[i]}, {"pixels", area}});
  }
  return Json{{"k", seg.confidences.size()}, {"instances", inst}, {"warnings", seg.warnings}};
}

inline Json report_to_json(const EvalReport& r) {
  const auto tau_key = [](double tau) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    return std::string(buf);
  };
  Json ap = Json::object();
  for (const auto& [tau, v] : r.ap_r) ap[tau_key(tau)] = v;
  Json per = Json::array();
  for (const auto& s : r.per_image) {
    Json e{{"id", s.id}};
    if (s.max_f) e["max_f"] = *s.max_f;
    if (s.mae) e["mae"] = *s.mae;
    if (!s.ap_r.empty()) {
      Json a = Json::object();
      for (const auto& [tau, v] : s.ap_r) a[tau_key(tau)] = v;
      e["ap_r"] = a;
    }
    per.push_back(e);
  }
  return Json{{"max_f", r.max_f}, {"mae", r.mae}, {"ap_r", ap}, {"per_image", per}};
}

/// Netblock parameters from a manifest mapping parameter names to NPY files
/// (paths relative to the manifest's directory):
///
///   {"se": {"w1": "...", "b1": "...", "w2": "...", "b2": "...", "r": 16},
///    "dense_layers": [{"bn_gamma": "...", "bn_beta": "...", "bn_mean": "...",
///                      "bn_var": "...", "conv_kernel": "..."}]}
struct NetblockManifest {
  std::optional<SeParams> se;
  std::vector<DenseLayerParams> dense_layers;
};

namespace config_detail {

inline Tensor load_entry(const Json& obj, const char* key, const std::filesystem::path& base) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw FormatError(std::string("manifest: missing NPY path for '") + key + "'");
  }
  return load_npy(base / obj.at(key).get<std::string>());
}

inline std::vector<double> as_vector(const Tensor& t, const char* key) {
  if (t.rank() != 1) throw ArgumentError(std::string("manifest: '") + key + "' must be a vector");
  return t.values();
}

inline Matrix as_matrix(const Tensor& t, const char* key) {
  if (t.rank() != 2) throw ArgumentError(std::string("manifest: '") + key + "' must be a matrix");
  return Matrix(t.dim(0), t.dim(1), t.values());
}

}  // namespace config_detail

inline NetblockManifest load_netblock_manifest(const std::filesystem::path& path) {
  using namespace config_detail;
  const Json j = parse_json_file(path);
  const auto base = path.parent_path();
  NetblockManifest m;
  if (j.contains("se")) {
    const auto& s = j.at("se");
    SeParams p{as_matrix(load_entry(s, "w1", base), "w1"), as_vector(load_entry(s, "b1", base), "b1"),
               as_matrix(load_entry(s, "w2", base), "w2"), as_vector(load_entry(s, "b2", base), "b2"),
               s.value("r", std::size_t{16})};
    p.validate();
    m.se = std::move(p);
  }
  if (j.contains("dense_layers")) {
    for (const auto& l : j.at("dense_layers")) {
      DenseLayerParams p{as_vector(load_entry(l, "bn_gamma", base), "bn_gamma"),
                         as_vector(load_entry(l, "bn_beta", base), "bn_beta"),
                         as_vector(load_entry(l, "bn_mean", base), "bn_mean"),
                         as_vector(load_entry(l, "bn_var", base), "bn_var"), load_entry(l, "conv_kernel", base)};
      p.validate();
      m.dense_layers.push_back(std::move(p));
    }
  }
  return m;
}

}  // namespace sis
