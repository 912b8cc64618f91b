#include "lvqa/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "lvqa/error.hpp"
#include "lvqa/handcrafted.hpp"
#include "lvqa/manifest.hpp"
#include "lvqa/media_io.hpp"
#include "lvqa/metrics.hpp"
#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Runs fn(i) for i in [0,n); fn must not throw. Index order is only a
// scheduling detail, results keyed by index stay deterministic.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  const int workers = std::min<int>(jobs, static_cast<int>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

struct ItemFailure {
  std::string path;
  std::string message;
};

json corpus_config_json(const CorpusOptions& o) {
  json j;
  j["n_sources"] = o.spec.n_sources;
  j["frames_per_video"] = o.spec.frames_per_video;
  j["width"] = o.spec.width;
  j["height"] = o.spec.height;
  j["fps"] = o.spec.fps;
  j["seed"] = o.spec.seed;
  j["darkness_range"] = {o.spec.darkness_range.first, o.spec.darkness_range.second};
  j["noise_sigma_range"] = {o.spec.noise_sigma_range.first, o.spec.noise_sigma_range.second};
  j["flicker_range"] = {o.spec.flicker_range.first, o.spec.flicker_range.second};
  j["n_variants"] = o.n_variants;
  j["mos_model"] = {{"base", o.mos_model.base},
                    {"w_brightness", o.mos_model.w_brightness},
                    {"brightness_opt", o.mos_model.brightness_opt},
                    {"brightness_width", o.mos_model.brightness_width},
                    {"w_contrast", o.mos_model.w_contrast},
                    {"contrast_ref", o.mos_model.contrast_ref},
                    {"w_noise", o.mos_model.w_noise},
                    {"noise_ref", o.mos_model.noise_ref},
                    {"w_flicker", o.mos_model.w_flicker},
                    {"flicker_ref", o.mos_model.flicker_ref}};
  return j;
}

std::string hash_json(const json& j) {
  const std::string text = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
  return buf;
}

// Source videos are named src%03d; enhanced variants cycle through two gamma
// strengths and histogram equalization, with per-variant seeded gammas.
struct VariantPlan {
  std::string suffix;
  std::function<Video(const Video&)> apply;
};

std::vector<VariantPlan> plan_variants(const CorpusSpec& spec, int source_index, int n_variants) {
  Rng rng(Rng::derive(spec.seed, 0xE4A + static_cast<uint64_t>(source_index)));
  std::vector<VariantPlan> plans;
  for (int j = 0; j < n_variants; ++j) {
    if (j % 3 == 2) {
      plans.push_back({"v" + std::to_string(j) + "_ghe", [](const Video& v) { return enhance_ghe(v); }});
    } else {
      const double gamma =
          j % 3 == 0 ? rng.uniform(1.3, 1.9) : rng.uniform(2.0, 3.0);
      plans.push_back({"v" + std::to_string(j) + "_gamma",
                       [gamma](const Video& v) { return enhance_gamma(v, gamma); }});
    }
  }
  return plans;
}

struct JoinedRow {
  double pred;
  double mos;
};

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report,
                        const std::string& config_hash_comment) {
  json j;
  j["n"] = report.n;
  j["srcc"] = report.srcc;
  j["plcc_raw"] = report.plcc_raw;
  j["rmse"] = report.rmse;
  if (report.plcc_fitted) {
    j["plcc_fitted"] = *report.plcc_fitted;
  } else {
    j["plcc_fitted"] = nullptr;
  }
  if (report.poly4) {
    j["poly4"] = {{"coeffs", report.poly4->coeffs},
                  {"x_mean", report.poly4->x_mean},
                  {"x_std", report.poly4->x_std}};
  } else {
    j["poly4"] = nullptr;
  }
  j["config_hash"] = config_hash_comment;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

struct LoadedSample {
  TrainSample sample;
  std::string path;
};

// Loads features for the given manifest rows (cache-aware, parallel) and
// slices them to the configured ablation.
std::vector<TrainSample> load_samples(const std::vector<ManifestEntry>& entries,
                                      const std::vector<size_t>& indices,
                                      const std::filesystem::path& manifest_path,
                                      const RunConfig& config) {
  const AblationMask mask = AblationMask::from_name(config.ablation);
  const int d_s = semantic_dim(config);
  const int d_m = motion_dim(config);

  std::vector<TrainSample> samples(indices.size());
  std::vector<std::string> errors(indices.size());
  parallel_for(indices.size(), config.jobs, [&](size_t i) {
    try {
      const ManifestEntry& entry = entries[indices[i]];
      const VideoFeatures full =
          load_or_compute_features(resolve_video_path(manifest_path, entry), config);
      apply_ablation(full, mask, d_s, d_m, samples[i].si, samples[i].ti);
      samples[i].mos = entry.mos;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (size_t i = 0; i < indices.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorCode::kIo,
                  "failed to prepare features for " + entries[indices[i]].video_path + ": " + errors[i]);
    }
  }
  return samples;
}

void append_epoch_logs(std::ofstream& out, const std::vector<EpochLog>& log,
                       const std::string& hash, const std::string& head_tag) {
  for (const EpochLog& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["train_mae"] = e.train_mae;
    j["train_rank"] = e.train_rank;
    j["val_srcc"] = e.val_srcc ? json(*e.val_srcc) : json(nullptr);
    j["val_plcc"] = e.val_plcc ? json(*e.val_plcc) : json(nullptr);
    j["val_rmse"] = e.val_rmse ? json(*e.val_rmse) : json(nullptr);
    j["config_hash"] = hash;
    if (!head_tag.empty()) j["head"] = head_tag;
    out << j.dump() << "\n";
  }
}

}  // namespace

int cmd_corpus(const CorpusOptions& options, std::ostream& out) {
  options.spec.validate();
  if (options.n_variants < 0) throw Error(ErrorCode::kConfig, "n_variants must be >= 0");

  namespace fs = std::filesystem;
  const fs::path videos_dir = options.out_dir / "videos";
  if (fs::exists(options.out_dir) && !fs::is_empty(options.out_dir) && !options.force) {
    throw Error(ErrorCode::kConfig,
                "output directory is not empty (use --force to overwrite): " +
                    options.out_dir.string());
  }
  fs::create_directories(videos_dir);

  const std::string hash = hash_json(corpus_config_json(options));
  const size_t sources = static_cast<size_t>(options.spec.n_sources);
  std::vector<std::vector<ManifestEntry>> per_source(sources);
  std::vector<std::string> errors(sources);

  parallel_for(sources, options.jobs, [&](size_t i) {
    try {
      char name[64];
      std::snprintf(name, sizeof(name), "src%03zu", i);
      const std::string source_id = name;
      const Video source = generate_source(options.spec, static_cast<int>(i));

      std::vector<std::pair<std::string, Video>> versions;
      versions.emplace_back(source_id + "_orig", source);
      for (const VariantPlan& plan :
           plan_variants(options.spec, static_cast<int>(i), options.n_variants)) {
        versions.emplace_back(source_id + "_" + plan.suffix, plan.apply(source));
      }

      for (auto& [stem, video] : versions) {
        const std::string rel = "videos/" + stem + ".rgbv";
        save_rgbv(options.out_dir / rel, video);
        ManifestEntry entry;
        entry.video_path = rel;
        entry.source_id = source_id;
        entry.mos = pseudo_mos(video, options.mos_model);
        entry.split = "auto";
        per_source[i].push_back(std::move(entry));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (size_t i = 0; i < sources; ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorCode::kIo, "corpus generation failed for source " + std::to_string(i) +
                                      ": " + errors[i]);
    }
  }

  std::vector<ManifestEntry> entries;
  for (auto& group : per_source) {
    for (ManifestEntry& e : group) entries.push_back(std::move(e));
  }
  write_manifest(options.out_dir / "manifest.csv", entries, hash);
  out << "corpus: wrote " << entries.size() << " videos ("
      << options.spec.n_sources << " sources x " << (options.n_variants + 1)
      << " versions) to " << options.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_extract(const ExtractOptions& options, std::ostream& out) {
  options.config.validate();
  const std::vector<ManifestEntry> entries = read_manifest(options.manifest);

  std::mutex mu;
  std::vector<ItemFailure> failures;
  std::atomic<size_t> cached{0};

  parallel_for(entries.size(), options.config.jobs, [&](size_t i) {
    try {
      bool from_cache = false;
      load_or_compute_features(resolve_video_path(options.manifest, entries[i]), options.config,
                               &from_cache);
      if (from_cache) cached.fetch_add(1);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mu);
      failures.push_back({entries[i].video_path, e.what()});
    }
  });

  out << "extract: " << entries.size() - failures.size() << "/" << entries.size()
      << " videos ready (" << cached.load() << " cache hits, "
      << entries.size() - failures.size() - cached.load() << " computed)\n";
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end(),
              [](const ItemFailure& a, const ItemFailure& b) { return a.path < b.path; });
    for (const ItemFailure& f : failures) {
      out << "extract: FAILED " << f.path << ": " << f.message << "\n";
    }
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_train(const TrainOptions& options, std::ostream& out) {
  options.config.validate();
  const RunConfig& config = options.config;
  const std::vector<ManifestEntry> entries = read_manifest(options.manifest);

  std::vector<std::string> source_ids(entries.size()), explicit_splits(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    source_ids[i] = entries[i].source_id;
    explicit_splits[i] = entries[i].split;
  }
  const Split split = make_split(source_ids, explicit_splits, config.ratios, config.seed);
  if (split.train.empty()) throw Error(ErrorCode::kConfig, "split produced an empty training set");

  if (!options.resolved_manifest_out.empty()) {
    std::vector<ManifestEntry> resolved = entries;
    for (size_t i : split.train) resolved[i].split = "train";
    for (size_t i : split.val) resolved[i].split = "val";
    for (size_t i : split.test) resolved[i].split = "test";
    write_manifest(options.resolved_manifest_out, resolved, config_hash(config));
  }

  const std::vector<TrainSample> train_set =
      load_samples(entries, split.train, options.manifest, config);
  const std::vector<TrainSample> val_set = load_samples(entries, split.val, options.manifest, config);

  const std::string hash = config_hash(config);
  const HeadLayout layout{config.fusion_dim, config.hidden_dim};
  Checkpoint ckpt;
  ckpt.fusion = config.fusion;
  ckpt.provenance = head_provenance(config);
  ckpt.config_hash = hash;

  std::ofstream log_out;
  if (!options.log_out.empty()) {
    log_out.open(options.log_out);
    if (!log_out) throw Error(ErrorCode::kIo, "cannot open log: " + options.log_out.string());
  }

  if (config.fusion == "mlp") {
    const TrainResult result = train_head(train_set, val_set, layout, config.loss_config());
    ckpt.head = result.params;
    if (log_out.is_open()) append_epoch_logs(log_out, result.log, hash, "");
    out << "train: best epoch " << result.best_epoch;
    if (!result.log.empty() && result.log[result.best_epoch].val_srcc) {
      out << " (val srcc " << fmt_double(*result.log[result.best_epoch].val_srcc) << ")";
    }
    out << "\n";
  } else {
    // Spatial-only and temporal-only heads, combined by linear regression on
    // the training predictions.
    auto strip = [](std::vector<TrainSample> set, bool keep_si) {
      for (TrainSample& s : set) {
        auto& gone = keep_si ? s.ti : s.si;
        for (auto& row : gone) row.clear();
      }
      return set;
    };
    const std::vector<TrainSample> train_s = strip(train_set, true);
    const std::vector<TrainSample> train_t = strip(train_set, false);

    LossConfig loss = config.loss_config();
    const TrainResult spatial = train_head(train_s, strip(val_set, true), layout, loss);
    loss.seed = Rng::derive(config.seed, 0x7E40);  // distinct init for the second head
    const TrainResult temporal = train_head(train_t, strip(val_set, false), layout, loss);

    std::vector<double> qs(train_s.size()), qt(train_s.size()), gt(train_s.size());
    for (size_t i = 0; i < train_s.size(); ++i) {
      qs[i] = predict_video(spatial.params, train_s[i]);
      qt[i] = predict_video(temporal.params, train_t[i]);
      gt[i] = train_s[i].mos;
    }
    const MlrBaseline mlr = fit_mlr_baseline(qs, qt, gt);
    ckpt.head = spatial.params;
    ckpt.temporal = temporal.params;
    ckpt.mlr_a = mlr.a;
    ckpt.mlr_b = mlr.b;
    ckpt.mlr_c = mlr.c;
    if (log_out.is_open()) {
      append_epoch_logs(log_out, spatial.log, hash, "spatial");
      append_epoch_logs(log_out, temporal.log, hash, "temporal");
    }
    out << "train: mlr combination a=" << fmt_double(mlr.a) << " b=" << fmt_double(mlr.b)
        << " c=" << fmt_double(mlr.c) << "\n";
  }

  save_checkpoint(options.checkpoint_out, ckpt);
  out << "train: checkpoint written to " << options.checkpoint_out.string() << "\n";
  return kExitOk;
}

int cmd_predict(const PredictOptions& options, std::ostream& out) {
  options.config.validate();
  const RunConfig& config = options.config;

  const Checkpoint ckpt = load_checkpoint(options.checkpoint);
  check_checkpoint_compatibility(ckpt, head_provenance(config));

  // Manifest input when the path ends in .csv; otherwise a single video.
  std::vector<ManifestEntry> entries;
  std::filesystem::path base;
  if (options.manifest.extension() == ".csv") {
    entries = read_manifest(options.manifest);
    base = options.manifest;
  } else {
    ManifestEntry single;
    single.video_path = options.manifest.string();
    single.source_id = "single";
    entries.push_back(std::move(single));
    base = std::filesystem::current_path() / "manifest.csv";  // absolute path passes through
  }

  const AblationMask mask = AblationMask::from_name(config.ablation);
  const int d_s = semantic_dim(config);
  const int d_m = motion_dim(config);

  struct Row {
    bool ok = false;
    std::string message;
    double q = 0.0;
    std::vector<double> per_clip;
  };
  std::vector<Row> rows(entries.size());

  parallel_for(entries.size(), config.jobs, [&](size_t i) {
    try {
      const VideoFeatures full =
          load_or_compute_features(resolve_video_path(base, entries[i]), config);
      TrainSample sample;
      apply_ablation(full, mask, d_s, d_m, sample.si, sample.ti);

      if (ckpt.fusion == "mlp") {
        rows[i].per_clip = predict_clips(ckpt.head, sample);
      } else {
        TrainSample spatial = sample, temporal = sample;
        for (auto& r : spatial.ti) r.clear();
        for (auto& r : temporal.si) r.clear();
        const std::vector<double> qs = predict_clips(ckpt.head, spatial);
        const std::vector<double> qt = predict_clips(ckpt.temporal, temporal);
        rows[i].per_clip.resize(qs.size());
        for (size_t c = 0; c < qs.size(); ++c) {
          rows[i].per_clip[c] = ckpt.mlr_a * qs[c] + ckpt.mlr_b * qt[c] + ckpt.mlr_c;
        }
      }
      rows[i].q = score_video(rows[i].per_clip);
      rows[i].ok = true;
    } catch (const std::exception& e) {
      rows[i].message = e.what();
    }
  });

  std::ofstream csv(options.out_csv);
  if (!csv) throw Error(ErrorCode::kIo, "cannot open for writing: " + options.out_csv.string());
  csv << "# config_hash=" << config_hash(config) << "\n";
  csv << "video,Q";
  for (int i = 1; i <= config.k; ++i) csv << ",Q_" << i;
  csv << "\n";

  size_t failed = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!rows[i].ok) {
      ++failed;
      out << "predict: FAILED " << entries[i].video_path << ": " << rows[i].message << "\n";
      continue;
    }
    csv << entries[i].video_path << "," << fmt_double(rows[i].q);
    for (double q : rows[i].per_clip) csv << "," << fmt_double(q);
    csv << "\n";
  }
  if (!csv) throw Error(ErrorCode::kIo, "write failed: " + options.out_csv.string());
  out << "predict: " << entries.size() - failed << "/" << entries.size() << " rows written to "
      << options.out_csv.string() << "\n";
  return failed == 0 ? kExitOk : kExitPartial;
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path,
                                                std::string* config_hash_comment) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open predictions: " + path.string());
  std::vector<PredictionRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("config_hash=");
      if (pos != std::string::npos && config_hash_comment) {
        *config_hash_comment = line.substr(pos + 12);
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("video,Q", 0) != 0) {
        throw Error(ErrorCode::kFormat, "predictions CSV must start with header video,Q,...");
      }
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    PredictionRow row;
    if (!std::getline(ss, row.video, ',')) continue;
    if (!std::getline(ss, field, ',')) {
      throw Error(ErrorCode::kFormat, "prediction row missing Q: " + line);
    }
    row.q = std::stod(field);
    while (std::getline(ss, field, ',')) row.per_clip.push_back(std::stod(field));
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw Error(ErrorCode::kFormat, "predictions CSV is empty: " + path.string());
  return rows;
}

int cmd_eval(const EvalOptions& options, std::ostream& out) {
  std::string pred_hash;
  const std::vector<PredictionRow> predictions = read_predictions_csv(options.predictions, &pred_hash);
  const std::vector<ManifestEntry> entries = read_manifest(options.manifest);

  std::map<std::string, const ManifestEntry*> by_path;
  for (const ManifestEntry& e : entries) by_path[e.video_path] = &e;

  // Every prediction must match a manifest row; the split filter then
  // selects which matched rows are scored.
  std::vector<JoinedRow> joined;
  std::vector<std::string> unmatched;
  for (const PredictionRow& p : predictions) {
    const auto it = by_path.find(p.video);
    if (it == by_path.end()) {
      unmatched.push_back(p.video);
    } else if (options.split.empty() || it->second->split == options.split) {
      joined.push_back({p.q, it->second->mos});
    }
  }
  if (!unmatched.empty()) {
    std::ostringstream msg;
    msg << unmatched.size() << " prediction rows have no manifest match:";
    for (const std::string& u : unmatched) msg << "\n  " << u;
    throw Error(ErrorCode::kFormat, msg.str());
  }

  std::vector<double> pred(joined.size()), gt(joined.size());
  for (size_t i = 0; i < joined.size(); ++i) {
    pred[i] = joined[i].pred;
    gt[i] = joined[i].mos;
  }
  const MetricsReport report = compute_metrics(pred, gt);

  write_metrics_json(options.metrics_out, report, pred_hash);
  if (!options.scatter_out.empty()) {
    std::ofstream scatter(options.scatter_out);
    if (!scatter) throw Error(ErrorCode::kIo, "cannot open: " + options.scatter_out.string());
    scatter << "# config_hash=" << pred_hash << "\n";
    scatter << "pred,mos,fitted_pred\n";
    for (size_t i = 0; i < pred.size(); ++i) {
      scatter << fmt_double(pred[i]) << "," << fmt_double(gt[i]) << ",";
      if (report.poly4) scatter << fmt_double(report.poly4->eval(pred[i]));
      scatter << "\n";
    }
  }

  out << "eval: n=" << report.n << " srcc=" << fmt_double(report.srcc)
      << " plcc=" << fmt_double(report.plcc_raw);
  if (report.plcc_fitted) out << " plcc_fitted=" << fmt_double(*report.plcc_fitted);
  out << " rmse=" << fmt_double(report.rmse) << "\n";
  return kExitOk;
}

int cmd_attrs(const AttrsOptions& options, std::ostream& out) {
  const std::vector<ManifestEntry> entries = read_manifest(options.manifest);

  struct Row {
    bool ok = false;
    std::string message;
    VideoAttributes attrs;
  };
  std::vector<Row> rows(entries.size());
  parallel_for(entries.size(), 2, [&](size_t i) {
    try {
      const Video video = load_video(resolve_video_path(options.manifest, entries[i]));
      rows[i].attrs = video_attributes(video, default_attribute_stride(video.frame_count()));
      rows[i].ok = true;
    } catch (const std::exception& e) {
      rows[i].message = e.what();
    }
  });

  std::vector<double> brightness, contrast, colorfulness;
  for (const Row& r : rows) {
    if (!r.ok) continue;
    brightness.push_back(r.attrs.brightness);
    contrast.push_back(r.attrs.contrast);
    colorfulness.push_back(r.attrs.colorfulness);
  }
  auto normalizer = [](const std::vector<double>& v) {
    // Degenerate columns (max == min) normalize to all zeros.
    double lo = 0.0, hi = 0.0;
    if (!v.empty()) {
      lo = *std::min_element(v.begin(), v.end());
      hi = *std::max_element(v.begin(), v.end());
    }
    const double span = hi - lo;
    return [lo, span](double x) { return span > 0.0 ? (x - lo) / span : 0.0; };
  };
  const auto norm_b = normalizer(brightness);
  const auto norm_c = normalizer(contrast);
  const auto norm_f = normalizer(colorfulness);

  std::ofstream csv(options.out_csv);
  if (!csv) throw Error(ErrorCode::kIo, "cannot open for writing: " + options.out_csv.string());
  csv << "video,brightness,contrast,colorfulness\n";
  size_t failed = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!rows[i].ok) {
      ++failed;
      out << "attrs: FAILED " << entries[i].video_path << ": " << rows[i].message << "\n";
      continue;
    }
    const VideoAttributes& a = rows[i].attrs;
    if (options.normalize) {
      csv << entries[i].video_path << "," << fmt_double(norm_b(a.brightness)) << ","
          << fmt_double(norm_c(a.contrast)) << "," << fmt_double(norm_f(a.colorfulness)) << "\n";
    } else {
      csv << entries[i].video_path << "," << fmt_double(a.brightness) << ","
          << fmt_double(a.contrast) << "," << fmt_double(a.colorfulness) << "\n";
    }
  }
  out << "attrs: " << entries.size() - failed << "/" << entries.size() << " rows written\n";
  return failed == 0 ? kExitOk : kExitPartial;
}

}  // namespace lvqa
