#include "lvqa/pipeline.hpp"

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lvqa/error.hpp"
#include "lvqa/handcrafted.hpp"
#include "lvqa/media_io.hpp"
#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

using nlohmann::json;

json provider_to_json(const ProviderConfig& p) {
  json j;
  j["kind"] = p.kind;
  if (p.kind == "builtin") {
    j["seed"] = p.seed;
  } else {
    j["path"] = p.path;
    j["dim"] = p.dim;
  }
  return j;
}

ProviderConfig provider_from_json(const json& j, uint64_t default_seed) {
  ProviderConfig p;
  p.seed = default_seed;
  if (j.contains("kind")) p.kind = j.at("kind").get<std::string>();
  if (j.contains("seed")) p.seed = j.at("seed").get<uint64_t>();
  if (j.contains("path")) p.path = j.at("path").get<std::string>();
  if (j.contains("dim")) p.dim = j.at("dim").get<int>();
  return p;
}

void validate_provider(const ProviderConfig& p, const char* which) {
  if (p.kind != "builtin" && p.kind != "file") {
    throw Error(ErrorCode::kConfig, std::string(which) + " provider kind must be builtin or file");
  }
  if (p.kind == "file") {
    if (p.path.empty()) throw Error(ErrorCode::kConfig, std::string(which) + " file provider needs a path");
    if (p.dim < 1) throw Error(ErrorCode::kConfig, std::string(which) + " file provider needs a declared dim");
  }
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash over the fields that determine feature values; ablation and the head
// layout are excluded so one cache serves every model variant.
uint64_t feature_cache_hash(const RunConfig& c) {
  json j;
  j["k"] = c.k;
  j["clip_edge"] = c.clip_edge;
  j["semantic"] = provider_to_json(c.semantic);
  j["motion"] = provider_to_json(c.motion);
  const std::string text = j.dump();
  return fnv1a64(text.data(), text.size());
}

std::string provider_id(const ProviderConfig& p, const char* builtin_name, int builtin_dim) {
  if (p.kind == "builtin") {
    return std::string(builtin_name) + ":seed=" + std::to_string(p.seed) +
           ":dim=" + std::to_string(builtin_dim);
  }
  return "file:dim=" + std::to_string(p.dim);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

AblationMask AblationMask::from_name(const std::string& name) {
  if (name == "full") return {true, true, true, true, true};
  if (name == "no-handcrafted") return {true, false, false, true, false};
  if (name == "no-bf-nf") return {true, false, false, true, true};
  if (name == "no-cf") return {true, true, true, true, false};
  if (name == "sf-only") return {true, false, false, false, false};
  if (name == "mf-only") return {false, false, false, true, false};
  throw Error(ErrorCode::kConfig, "unknown ablation '" + name + "'");
}

void RunConfig::validate() const {
  SamplingPlan{k, clip_edge}.validate();
  validate_provider(semantic, "semantic");
  validate_provider(motion, "motion");
  AblationMask::from_name(ablation);
  if (fusion != "mlp" && fusion != "mlr") {
    throw Error(ErrorCode::kConfig, "fusion must be mlp or mlr");
  }
  if (fusion_dim < 1 || hidden_dim < 1) {
    throw Error(ErrorCode::kConfig, "head layer widths must be positive");
  }
  if (rank_sign != "pred" && rank_sign != "gt") {
    throw Error(ErrorCode::kConfig, "rank_sign must be pred or gt");
  }
  loss_config().validate();
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kConfig, "split ratios must sum to 1");
  if (jobs < 1) throw Error(ErrorCode::kConfig, "jobs must be >= 1");
}

LossConfig RunConfig::loss_config() const {
  LossConfig lc;
  lc.beta = beta;
  lc.batch_size = batch_size;
  lc.epochs = epochs;
  lc.learning_rate = learning_rate;
  lc.weight_decay = weight_decay;
  lc.seed = seed;
  lc.rank_sign = rank_sign == "gt" ? RankSignSource::kGroundTruth : RankSignSource::kPredictions;
  return lc;
}

std::string RunConfig::to_canonical_json() const {
  json j;
  j["k"] = k;
  j["clip_edge"] = clip_edge;
  j["semantic"] = provider_to_json(semantic);
  j["motion"] = provider_to_json(motion);
  j["ablation"] = ablation;
  j["fusion"] = fusion;
  j["fusion_dim"] = fusion_dim;
  j["hidden_dim"] = hidden_dim;
  j["seed"] = seed;
  j["loss"] = {{"beta", beta},
               {"batch_size", batch_size},
               {"epochs", epochs},
               {"learning_rate", learning_rate},
               {"weight_decay", weight_decay},
               {"rank_sign", rank_sign}};
  j["ratios"] = ratios;
  return j.dump();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("k")) c.k = j.at("k").get<int>();
    if (j.contains("clip_edge")) c.clip_edge = j.at("clip_edge").get<int>();
    if (j.contains("semantic")) c.semantic = provider_from_json(j.at("semantic"), c.semantic.seed);
    if (j.contains("motion")) c.motion = provider_from_json(j.at("motion"), c.motion.seed);
    if (j.contains("ablation")) c.ablation = j.at("ablation").get<std::string>();
    if (j.contains("fusion")) c.fusion = j.at("fusion").get<std::string>();
    if (j.contains("fusion_dim")) c.fusion_dim = j.at("fusion_dim").get<uint32_t>();
    if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<uint32_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      if (l.contains("beta")) c.beta = l.at("beta").get<double>();
      if (l.contains("batch_size")) c.batch_size = l.at("batch_size").get<int>();
      if (l.contains("epochs")) c.epochs = l.at("epochs").get<int>();
      if (l.contains("learning_rate")) c.learning_rate = l.at("learning_rate").get<double>();
      if (l.contains("weight_decay")) c.weight_decay = l.at("weight_decay").get<double>();
      if (l.contains("rank_sign")) c.rank_sign = l.at("rank_sign").get<std::string>();
    }
    if (j.contains("ratios")) {
      const auto r = j.at("ratios").get<std::vector<double>>();
      if (r.size() != 3) throw Error(ErrorCode::kConfig, "ratios must have 3 entries");
      std::copy(r.begin(), r.end(), c.ratios.begin());
    }
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_json_file(const std::filesystem::path& path) {
  return from_json_text(read_file_bytes(path));
}

std::string config_hash(const RunConfig& config) {
  const std::string text = config.to_canonical_json();
  return hex64(fnv1a64(text.data(), text.size()));
}

int semantic_dim(const RunConfig& config) {
  return config.semantic.kind == "builtin" ? SemanticBackbone::kDim : config.semantic.dim;
}

int motion_dim(const RunConfig& config) {
  return config.motion.kind == "builtin" ? MotionBackbone::kDim : config.motion.dim;
}

Providers make_providers_for_video(const RunConfig& config,
                                   const std::filesystem::path& video_path) {
  auto from_file_checked = [&](const ProviderConfig& pc, const char* suffix) {
    const auto file =
        std::filesystem::path(pc.path) / (video_path.stem().string() + suffix);
    FeatureProvider provider = FeatureProvider::from_file(file);
    if (provider.dim() != pc.dim) {
      throw Error(ErrorCode::kCompatibility,
                  "feature file dim " + std::to_string(provider.dim()) + " != declared " +
                      std::to_string(pc.dim) + ": " + file.string());
    }
    return provider;
  };
  return Providers{
      config.semantic.kind == "builtin" ? FeatureProvider::builtin_semantic(config.semantic.seed)
                                        : from_file_checked(config.semantic, ".sf.lvqf"),
      config.motion.kind == "builtin" ? FeatureProvider::builtin_motion(config.motion.seed)
                                      : from_file_checked(config.motion, ".mf.lvqf"),
  };
}

std::string head_provenance(const RunConfig& config) {
  std::ostringstream ss;
  ss << "semantic=" << provider_id(config.semantic, "builtin-semantic", SemanticBackbone::kDim)
     << ";motion=" << provider_id(config.motion, "builtin-motion", MotionBackbone::kDim)
     << ";k=" << config.k << ";clip_edge=" << config.clip_edge
     << ";ablation=" << config.ablation << ";fusion=" << config.fusion
     << ";fusion_dim=" << config.fusion_dim << ";hidden_dim=" << config.hidden_dim;
  return ss.str();
}

VideoFeatures compute_features(const Video& video, const Providers& providers,
                               const SamplingPlan& plan) {
  const std::vector<KeyFrame> keys = sample_key_frames(video, plan);
  const std::vector<Video> clips = split_clips(video, plan);

  VideoFeatures features;
  features.si.reserve(keys.size());
  features.ti.reserve(clips.size());

  for (size_t i = 0; i < keys.size(); ++i) {
    const Frame& frame = keys[i].frame;
    std::vector<double> row = providers.semantic.frame_features(frame, i);
    const std::vector<double> bf = brightness_features(frame).to_vector();
    const std::vector<double> nf = noise_features(frame).to_vector();
    row.insert(row.end(), bf.begin(), bf.end());
    row.insert(row.end(), nf.begin(), nf.end());
    features.si.emplace_back(row.begin(), row.end());  // narrow to f32
  }
  for (size_t i = 0; i < clips.size(); ++i) {
    std::vector<double> row = providers.motion.clip_features(clips[i], i);
    const std::vector<double> cf = brightness_consistency(clips[i]).to_vector();
    row.insert(row.end(), cf.begin(), cf.end());
    features.ti.emplace_back(row.begin(), row.end());
  }
  return features;
}

VideoFeatures load_or_compute_features(const std::filesystem::path& video_path,
                                       const RunConfig& config, bool* from_cache) {
  const std::string bytes = read_file_bytes(video_path);
  const uint64_t content = fnv1a64(bytes.data(), bytes.size());
  const std::string key = hex64(content) + "-" + hex64(feature_cache_hash(config));
  const auto si_path = config.cache_dir / (key + ".si.lvqf");
  const auto ti_path = config.cache_dir / (key + ".ti.lvqf");

  if (std::filesystem::exists(si_path) && std::filesystem::exists(ti_path)) {
    VideoFeatures features;
    features.si = read_features(si_path);
    features.ti = read_features(ti_path);
    const size_t kk = static_cast<size_t>(config.k);
    if (features.si.size() == kk && features.ti.size() == kk) {
      if (from_cache) *from_cache = true;
      return features;
    }
    // Key collision or interrupted write: fall through and recompute.
  }

  const Video video = load_video_bytes(bytes, video_path.string());
  const Providers providers = make_providers_for_video(config, video_path);
  VideoFeatures features = compute_features(video, providers, config.sampling_plan());

  std::filesystem::create_directories(config.cache_dir);
  const auto tmp_suffix = "." + hex64(Rng(content ^ ::getpid()).next_u64()) + ".tmp";
  const auto si_tmp = si_path.string() + tmp_suffix;
  const auto ti_tmp = ti_path.string() + tmp_suffix;
  write_features(si_tmp, features.si);
  write_features(ti_tmp, features.ti);
  std::filesystem::rename(si_tmp, si_path);
  std::filesystem::rename(ti_tmp, ti_path);

  if (from_cache) *from_cache = false;
  return features;
}

void apply_ablation(const VideoFeatures& full, const AblationMask& mask, int d_s, int d_m,
                    std::vector<std::vector<float>>& si, std::vector<std::vector<float>>& ti) {
  si.clear();
  ti.clear();
  si.reserve(full.si.size());
  ti.reserve(full.ti.size());
  const size_t expected_si = static_cast<size_t>(d_s) + BrightnessFeatures::kDim + NoiseFeatures::kDim;
  const size_t expected_ti = static_cast<size_t>(d_m) + ConsistencyFeatures::kDim;

  for (const auto& row : full.si) {
    if (row.size() != expected_si) {
      throw Error(ErrorCode::kCompatibility,
                  "cached spatial vector dim " + std::to_string(row.size()) + " != expected " +
                      std::to_string(expected_si));
    }
    std::vector<float> out;
    if (mask.sf) out.insert(out.end(), row.begin(), row.begin() + d_s);
    if (mask.bf) out.insert(out.end(), row.begin() + d_s, row.begin() + d_s + BrightnessFeatures::kDim);
    if (mask.nf) out.insert(out.end(), row.begin() + d_s + BrightnessFeatures::kDim, row.end());
    si.push_back(std::move(out));
  }
  for (const auto& row : full.ti) {
    if (row.size() != expected_ti) {
      throw Error(ErrorCode::kCompatibility,
                  "cached temporal vector dim " + std::to_string(row.size()) + " != expected " +
                      std::to_string(expected_ti));
    }
    std::vector<float> out;
    if (mask.mf) out.insert(out.end(), row.begin(), row.begin() + d_m);
    if (mask.cf) out.insert(out.end(), row.begin() + d_m, row.end());
    ti.push_back(std::move(out));
  }
}

std::pair<int, int> ablated_dims(const AblationMask& mask, int d_s, int d_m) {
  int si = 0, ti = 0;
  if (mask.sf) si += d_s;
  if (mask.bf) si += BrightnessFeatures::kDim;
  if (mask.nf) si += NoiseFeatures::kDim;
  if (mask.mf) ti += d_m;
  if (mask.cf) ti += ConsistencyFeatures::kDim;
  return {si, ti};
}

}  // namespace lvqa
