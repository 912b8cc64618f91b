#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lvqa/backbone.hpp"
#include "lvqa/frame.hpp"
#include "lvqa/training.hpp"

namespace lvqa {

struct ProviderConfig {
  std::string kind = "builtin";  // "builtin" | "file"
  uint64_t seed = 0;             // builtin only
  std::string path;              // file only: directory of per-video LVQF files
  int dim = 0;                   // file only: declared feature dimension
};

// Which feature blocks enter the spatial/temporal information vectors.
struct AblationMask {
  bool sf = true, bf = true, nf = true, mf = true, cf = true;

  static AblationMask from_name(const std::string& name);
};

// Everything that defines a run. Fields below `cache_dir` are workspace
// locations and parallelism; they are excluded from the config hash so that
// artifacts produced in different directories stay byte-comparable.
struct RunConfig {
  int k = 8;
  int clip_edge = 64;
  ProviderConfig semantic{"builtin", 1001, "", 0};
  ProviderConfig motion{"builtin", 2002, "", 0};
  std::string ablation = "full";
  std::string fusion = "mlp";  // mlp | mlr
  uint32_t fusion_dim = 1024;
  uint32_t hidden_dim = 128;
  uint64_t seed = 7;  // master seed: split, head init, batch shuffling
  double beta = 0.5;
  int batch_size = 8;
  int epochs = 200;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::string rank_sign = "pred";  // pred | gt
  std::array<double, 3> ratios = {63.0 / 103.0, 20.0 / 103.0, 20.0 / 103.0};

  std::filesystem::path cache_dir = "cache";
  int jobs = 1;

  void validate() const;
  LossConfig loss_config() const;
  SamplingPlan sampling_plan() const { return SamplingPlan{k, clip_edge}; }

  // Canonical JSON of the semantic fields (sorted keys, no workspace paths).
  std::string to_canonical_json() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::filesystem::path& path);
};

// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

struct Providers {
  FeatureProvider semantic;
  FeatureProvider motion;
};

// Builds providers for builtin kinds. File-kind providers are constructed
// per video (one LVQF file per video: <stem>.sf.lvqf / <stem>.mf.lvqf under
// the configured directory).
Providers make_providers_for_video(const RunConfig& config,
                                   const std::filesystem::path& video_path);

// Feature dimensions implied by the provider configuration.
int semantic_dim(const RunConfig& config);
int motion_dim(const RunConfig& config);

// Identity string recorded in checkpoints; prediction refuses to run when
// the stored string differs from the active configuration's.
std::string head_provenance(const RunConfig& config);

// Full (unablated) per-video features: k spatial rows [SF|BF|NF] and k
// temporal rows [MF|CF], narrowed to f32. The narrowing happens here so that
// cached and freshly computed features are bit-identical.
struct VideoFeatures {
  std::vector<std::vector<float>> si;
  std::vector<std::vector<float>> ti;
};

VideoFeatures compute_features(const Video& video, const Providers& providers,
                               const SamplingPlan& plan);

// Cache-aware variant keyed by (video content hash, feature config hash).
// Cache files are written atomically (temp + rename).
VideoFeatures load_or_compute_features(const std::filesystem::path& video_path,
                                       const RunConfig& config, bool* from_cache = nullptr);

// Slices the full blocks down to the configured ablation.
void apply_ablation(const VideoFeatures& full, const AblationMask& mask, int d_s, int d_m,
                    std::vector<std::vector<float>>& si, std::vector<std::vector<float>>& ti);

// (d_SI, d_TI) after ablation.
std::pair<int, int> ablated_dims(const AblationMask& mask, int d_s, int d_m);

}  // namespace lvqa
