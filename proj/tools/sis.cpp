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

// sis: salient instance segmentation command-line tool.
//
//   sis segment  --image I.ppm --saliency S.pgm --features F.npy --k 2 --out labels.pgm
//   sis crf      --image I.ppm --saliency S.pgm --out refined.pgm
//   sis slic     --image I.ppm --out superpixels.pgm
//   sis eval     --manifest eval.json --out report.json
//   sis synth    --count 3 --size 64 --seed 7 --out-dir fixture/
//   sis netcheck
//
// Exit codes: 0 success, 1 input/output or argument error, 2 infeasible k.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "sis/config.hpp"
#include "sis/sis.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasibleK = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sis");
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SIS_LOG")) {
    const std::string level = env;
    if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else spdlog::warn("ignoring unknown SIS_LOG level '{}'", level);
  }
}

void log_timings(const std::vector<sis::StageTiming>& timings) {
  for (const auto& t : timings) spdlog::info("stage={} ms={:.3f}", t.stage, t.milliseconds);
}

bool is_npy(const fs::path& p) { return p.extension() == ".npy"; }

sis::Tensor load_rgb(const fs::path& path) {
  const auto img = sis::load_pnm(path);
  auto t = sis::image_to_tensor(img);
  if (img.channels == 3) return t;
  // Grey input: replicate the channel.
  sis::Tensor rgb(sis::Shape{img.height, img.width, 3});
  for (std::size_t i = 0; i < img.height * img.width; ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = t[i];
  return rgb;
}

// [h,w] map in [0,1] from a PGM or an NPY of shape [h,w] / [h,w,1].
sis::Tensor load_map(const fs::path& path) {
  if (is_npy(path)) {
    auto t = sis::load_npy(path);
    if (t.rank() == 3 && t.dim(2) == 1) return std::move(t).reshaped({t.dim(0), t.dim(1)});
    if (t.rank() != 2) throw sis::ArgumentError(path.string() + ": expected an [h,w] map");
    return t;
  }
  const auto img = sis::load_pnm(path);
  if (img.channels != 1) throw sis::ArgumentError(path.string() + ": expected a single-channel PGM");
  auto t = sis::image_to_tensor(img);
  return std::move(t).reshaped({img.height, img.width});
}

sis::Tensor load_label_map(const fs::path& path) {
  if (is_npy(path)) return sis::load_npy(path);
  return sis::image_to_labels(sis::load_pnm(path));
}

fs::path sidecar_path(const fs::path& out) {
  auto p = out;
  p.replace_extension(".json");
  return p;
}

struct PipelineFlags {
  std::string config;
  std::optional<std::size_t> superpixels;
  std::optional<double> lambda;
  std::optional<double> sigma2;
  std::optional<double> compactness;
  bool refine_crf = false;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--superpixels", f.superpixels, "target superpixel count (default 250)");
  cmd->add_option("--lambda", f.lambda, "spatial-distance weight (default 3)");
  cmd->add_option("--sigma2", f.sigma2, "feature affinity bandwidth (default 10)");
  cmd->add_option("--compactness", f.compactness, "SLIC compactness (default 10)");
  cmd->add_flag("--refine-crf", f.refine_crf, "refine the saliency map with the dense CRF first");
}

// Flags override the config file, which overrides the defaults.
sis::PipelineConfig resolve_config(const PipelineFlags& f) {
  sis::PipelineConfig cfg;
  if (!f.config.empty()) sis::apply_config_json(sis::parse_json_file(f.config), cfg);
  if (f.superpixels) cfg.n_superpixels = *f.superpixels;
  if (f.lambda) cfg.lambda = *f.lambda;
  if (f.sigma2) cfg.sigma2 = *f.sigma2;
  if (f.compactness) cfg.compactness = *f.compactness;
  if (f.refine_crf) cfg.refine_crf = true;
  return cfg;
}

struct SegmentArgs {
  std::string image, saliency, features, out, k_file;
  std::optional<std::size_t> k;
  PipelineFlags flags;
};

int run_segment(const SegmentArgs& a) {
  const auto cfg = resolve_config(a.flags);
  std::size_t k = 0;
  if (a.k) {
    k = *a.k;
  } else if (!a.k_file.empty()) {
    k = sis::parse_k_sidecar(sis::parse_json_file(a.k_file));
  } else if (!cfg.k_override) {
    throw sis::ArgumentError("segment: supply --k, --k-file or k_override in the config");
  }
  const auto image = load_rgb(a.image);
  const auto saliency = load_map(a.saliency);
  auto features = sis::load_npy(a.features);
  if (features.rank() == 2) features = std::move(features).reshaped({features.dim(0), features.dim(1), 1});

  spdlog::debug("segment: image {}x{}, k={}, superpixels={}", image.dim(0), image.dim(1),
                cfg.k_override.value_or(k), cfg.n_superpixels);
  const auto result = sis::run_pipeline(image, saliency, features, k, cfg);
  log_timings(result.timings);
  for (const auto& w : result.segmentation.warnings) spdlog::warn("{}", w);

  const auto labels = sis::write_pnm(sis::labels_to_image(result.segmentation.labels));
  const auto sidecar = sis::segmentation_sidecar(result.segmentation).dump(2) + "\n";
  sis::write_file_atomic(a.out, labels);
  sis::write_file_atomic(sidecar_path(a.out), sidecar);
  spdlog::info("wrote {} and {}", a.out, sidecar_path(a.out).string());
  return kExitOk;
}

struct CrfArgs {
  std::string image, saliency, unary, out, out_unary, config;
  std::optional<std::size_t> iters;
};

int run_crf(const CrfArgs& a) {
  sis::PipelineConfig cfg;
  if (!a.config.empty()) sis::apply_config_json(sis::parse_json_file(a.config), cfg);
  if (a.iters) cfg.crf.iters = *a.iters;
  const auto image = load_rgb(a.image);
  sis::UnaryField unary;
  if (!a.unary.empty()) {
    unary.probs = sis::load_npy(a.unary);
    unary.validate();
  } else if (!a.saliency.empty()) {
    unary = sis::UnaryField::from_saliency(sis::resize_bilinear(load_map(a.saliency), image.dim(0), image.dim(1)));
  } else {
    throw sis::ArgumentError("crf: supply --saliency or --unary");
  }
  std::vector<sis::StageTiming> timings;
  const auto start = std::chrono::steady_clock::now();
  const auto refined = sis::mean_field_refine(unary, image, cfg.crf);
  timings.push_back({"crf", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()});
  log_timings(timings);

  const auto pgm = sis::write_pnm(sis::tensor_to_image(refined.saliency(), 255));
  std::optional<sis::Bytes> npy;
  if (!a.out_unary.empty()) npy = sis::write_npy(refined.probs);
  sis::write_file_atomic(a.out, pgm);
  if (npy) sis::write_file_atomic(a.out_unary, *npy);
  return kExitOk;
}

struct SlicArgs {
  std::string image, saliency, out;
  std::size_t superpixels = 250;
  double compactness = 10.0;
  std::size_t iters = 10;
  double threshold = 0.5;
};

int run_slic(const SlicArgs& a) {
  auto image = load_rgb(a.image);
  if (!a.saliency.empty()) {
    const auto sal = sis::resize_bilinear(load_map(a.saliency), image.dim(0), image.dim(1));
    image = sis::mask_background(image, sal, a.threshold);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto part = sis::slic_segment(sis::rgb_to_lab(image), std::min(a.superpixels, image.dim(0) * image.dim(1)),
                                      a.compactness, a.iters);
  log_timings({{"slic", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()}});
  spdlog::info("{} superpixels", part.n_superpixels);
  sis::write_file_atomic(a.out, sis::write_pnm(sis::labels_to_image(part.labels)));
  return kExitOk;
}

struct EvalArgs {
  std::string manifest, out;
  std::vector<double> taus = {0.5, 0.6, 0.7, 0.8, 0.9};
  double beta2 = sis::kDefaultBeta2;
};

// Manifest: {"images": [{"id": "...", "saliency": "s.pgm", "saliency_gt": "g.pgm",
//                        "instances": "l.pgm", "instances_gt": "gl.pgm"}, ...]}
int run_eval(const EvalArgs& a) {
  const auto j = sis::parse_json_file(a.manifest);
  if (!j.contains("images") || !j.at("images").is_array()) throw sis::FormatError("eval manifest needs an 'images' array");
  const auto base = fs::path(a.manifest).parent_path();
  std::vector<sis::EvalEntry> entries;
  for (const auto& e : j.at("images")) {
    sis::EvalEntry entry;
    entry.id = e.value("id", std::to_string(entries.size()));
    if (e.contains("saliency")) entry.saliency = load_map(base / e.at("saliency").get<std::string>());
    if (e.contains("saliency_gt")) entry.saliency_gt = load_map(base / e.at("saliency_gt").get<std::string>());
    if (e.contains("instances")) entry.instances = load_label_map(base / e.at("instances").get<std::string>());
    if (e.contains("instances_gt")) entry.instances_gt = load_label_map(base / e.at("instances_gt").get<std::string>());
    entries.push_back(std::move(entry));
  }
  const auto report = sis::evaluate(entries, a.taus, a.beta2);
  const auto text = sis::report_to_json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    sis::write_file_atomic(a.out, text);
  }
  return kExitOk;
}

struct SynthArgs {
  std::size_t count = 2, size = 64;
  std::uint64_t seed = 0;
  bool mixed = false;
  std::string out_dir;
};

int run_synth(const SynthArgs& a) {
  sis::SynthSpec spec;
  spec.count = a.count;
  spec.height = spec.width = a.size;
  spec.seed = a.seed;
  spec.mixed_shapes = a.mixed;
  const auto f = sis::synth_fixture(spec);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  sis::write_file_atomic(dir / "image.ppm", sis::write_pnm(f.image));
  sis::write_file_atomic(dir / "saliency.pgm", sis::write_pnm(sis::tensor_to_image(f.saliency, 255)));
  sis::write_file_atomic(dir / "features.npy", sis::write_npy(f.features));
  sis::write_file_atomic(dir / "ground_truth.pgm", sis::write_pnm(sis::labels_to_image(f.ground_truth)));
  sis::write_file_atomic(dir / "k.json", sis::Json{{"k", f.k()}}.dump() + "\n");
  spdlog::info("wrote fixture with {} shapes to {}", f.k(), dir.string());
  return kExitOk;
}

struct NetcheckArgs {
  std::string manifest, input, out;
};

// Built-in kernel checks; with --manifest and --input also runs the
// configured blocks forward and optionally saves the result.
int run_netcheck(const NetcheckArgs& a) {
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    failures += !ok;
  };
  std::mt19937_64 rng(20260117);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  {
    sis::Tensor x(sis::Shape{4, 4, 32});
    for (auto& v : x.data()) v = uni(rng);
    const auto gate = sis::se_gate(x, sis::SeParams::zeros(32, 16));
    const bool ok = std::all_of(gate.begin(), gate.end(), [](double g) { return g == 0.5; });
    report("se_zero_weights_gate_half", ok, "C=32 r=16 bottleneck=2");
  }
  {
    bool ok = true;
    for (std::size_t layers = 0; layers <= 5; ++layers) {
      const std::size_t c0 = 4, g = 12;
      std::vector<sis::DenseLayerParams> block;
      for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = c0 + l * g;
        block.push_back({std::vector<double>(in, 1.0), std::vector<double>(in, 0.0), std::vector<double>(in, 0.0),
                         std::vector<double>(in, 1.0), sis::Tensor(sis::Shape{3, 3, in, g}, 0.01)});
      }
      sis::Tensor x(sis::Shape{3, 3, c0}, 0.5);
      ok = ok && sis::dense_block_forward(x, block).dim(2) == c0 + layers * g;
    }
    report("dense_block_channel_count", ok, "C0=4 g=12 L=0..5");
  }
  {
    sis::Tensor yhat(sis::Shape{6, 4}), y(sis::Shape{6, 4});
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0;
      for (std::size_t c = 0; c < 4; ++c) sum += yhat.at(i, c) = 0.2 + 0.5 * (uni(rng) + 1.0);
      for (std::size_t c = 0; c < 4; ++c) yhat.at(i, c) /= sum;
      y.at(i, i % 4) = 1.0;
    }
    const std::vector<double> weights = {1.0, 2.0, 0.5, 1.5};
    const sis::CrossEntropyOptions loose{1e-12, false};
    const double err = sis::finite_diff_check(
        [&](const sis::Tensor& p) { return sis::weighted_cross_entropy(p, y, weights, loose).loss; },
        [&](const sis::Tensor& p) { return sis::weighted_cross_entropy(p, y, weights, loose).gradient; }, yhat, 1e-5);
    report("cross_entropy_gradient", err <= 1e-6, "max_rel_err=" + std::to_string(err));
  }
  {
    sis::Tensor yhat(sis::Shape{1, 2}, 0.5), y(sis::Shape{1, 2});
    y.at(0, 0) = 1.0;
    const double loss = sis::weighted_cross_entropy(yhat, y).loss;
    report("cross_entropy_uniform_ln2", std::abs(loss - std::log(2.0)) <= 1e-12, "loss=" + std::to_string(loss));
  }

  if (!a.manifest.empty()) {
    if (a.input.empty()) throw sis::ArgumentError("netcheck: --manifest requires --input");
    const auto params = sis::load_netblock_manifest(a.manifest);
    auto x = sis::load_npy(a.input);
    if (params.se) x = sis::se_forward(x, *params.se);
    if (!params.dense_layers.empty()) x = sis::dense_block_forward(x, params.dense_layers);
    std::cout << "forward output shape " << sis::shape_string(x.shape()) << "\n";
    if (!a.out.empty()) sis::write_file_atomic(a.out, sis::write_npy(x));
  }
  return failures == 0 ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Salient instance segmentation via spectral clustering of deep features"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "cluster the salient region into k instances");
  segment->add_option("--image", seg.image, "RGB image (PPM/PGM)")->required()->check(CLI::ExistingFile);
  segment->add_option("--saliency", seg.saliency, "saliency map (PGM or NPY)")->required()->check(CLI::ExistingFile);
  segment->add_option("--features", seg.features, "feature map [h,w,c] (NPY)")->required()->check(CLI::ExistingFile);
  auto* k_opt = segment->add_option("--k", seg.k, "instance count")->check(CLI::PositiveNumber);
  segment->add_option("--k-file", seg.k_file, "subitizing sidecar JSON")->check(CLI::ExistingFile)->excludes(k_opt);
  segment->add_option("--out", seg.out, "output 16-bit label PGM; confidences go to the .json sibling")->required();
  add_pipeline_flags(segment, seg.flags);

  CrfArgs crf;
  auto* crf_cmd = app.add_subcommand("crf", "refine a saliency map with the dense CRF");
  crf_cmd->add_option("--image", crf.image, "RGB image (PPM/PGM)")->required()->check(CLI::ExistingFile);
  crf_cmd->add_option("--saliency", crf.saliency, "saliency map (PGM or NPY)")->check(CLI::ExistingFile);
  crf_cmd->add_option("--unary", crf.unary, "unary field [h,w,2] (NPY)")->check(CLI::ExistingFile);
  crf_cmd->add_option("--out", crf.out, "refined saliency PGM")->required();
  crf_cmd->add_option("--out-unary", crf.out_unary, "refined marginals [h,w,2] (NPY)");
  crf_cmd->add_option("--config", crf.config, "JSON configuration file")->check(CLI::ExistingFile);
  crf_cmd->add_option("--iters", crf.iters, "mean-field iterations (default 10)");

  SlicArgs slic;
  auto* slic_cmd = app.add_subcommand("slic", "SLIC superpixels as a 16-bit label PGM");
  slic_cmd->add_option("--image", slic.image, "RGB image (PPM/PGM)")->required()->check(CLI::ExistingFile);
  slic_cmd->add_option("--saliency", slic.saliency, "mask pixels below the threshold to black first")
      ->check(CLI::ExistingFile);
  slic_cmd->add_option("--superpixels", slic.superpixels, "target superpixel count")->check(CLI::PositiveNumber);
  slic_cmd->add_option("--compactness", slic.compactness, "compactness");
  slic_cmd->add_option("--iters", slic.iters, "Lloyd iterations")->check(CLI::PositiveNumber);
  slic_cmd->add_option("--out", slic.out, "output label PGM")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "maxF, MAE and AP^r over a manifest of prediction/ground-truth pairs");
  eval_cmd->add_option("--manifest", ev.manifest, "evaluation manifest JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--iou", ev.taus, "IoU thresholds for AP^r")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--beta2", ev.beta2, "F-measure beta^2 (default 0.3)");
  eval_cmd->add_option("--out", ev.out, "report JSON (stdout when omitted)");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic fixture with known instances");
  synth_cmd->add_option("--count", syn.count, "number of shapes (1..8)")->check(CLI::Range(1, 8));
  synth_cmd->add_option("--size", syn.size, "image side in pixels")->check(CLI::Range(8, 4096));
  synth_cmd->add_option("--seed", syn.seed, "generator seed");
  synth_cmd->add_flag("--mixed", syn.mixed, "alternate disks and rectangles");
  synth_cmd->add_option("--out-dir", syn.out_dir, "output directory")->required();

  NetcheckArgs nc;
  auto* netcheck = app.add_subcommand("netcheck", "verify the network block kernels");
  netcheck->add_option("--manifest", nc.manifest, "parameter manifest JSON")->check(CLI::ExistingFile);
  netcheck->add_option("--input", nc.input, "input tensor [H,W,C] (NPY)")->check(CLI::ExistingFile);
  netcheck->add_option("--out", nc.out, "forward output (NPY)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*segment) return run_segment(seg);
    if (*crf_cmd) return run_crf(crf);
    if (*slic_cmd) return run_slic(slic);
    if (*eval_cmd) return run_eval(ev);
    if (*synth_cmd) return run_synth(syn);
    if (*netcheck) return run_netcheck(nc);
  } catch (const sis::InstanceCountError& e) {
    spdlog::error("{} (feasible maximum k = {})", e.what(), e.feasible_max());
    return kExitInfeasibleK;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitError;
}
