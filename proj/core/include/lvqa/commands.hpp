#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lvqa/corpus.hpp"
#include "lvqa/model.hpp"
#include "lvqa/pipeline.hpp"

namespace lvqa {

// Exit codes shared by every command: 0 success, 2 partial per-item
// failure, 1 fatal.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct CorpusOptions {
  std::filesystem::path out_dir;
  bool force = false;
  CorpusSpec spec;
  int n_variants = 3;  // enhanced versions per source, in addition to the original
  PseudoMosModel mos_model;
  int jobs = 1;
};

// Writes videos/<name>.rgbv plus manifest.csv with analytic pseudo-MOS.
// Idempotent per seed. Refuses a non-empty output directory without force.
int cmd_corpus(const CorpusOptions& options, std::ostream& out);

struct ExtractOptions {
  std::filesystem::path manifest;
  RunConfig config;
};

// Fills the feature cache for every manifest entry. Per-video failures are
// collected and reported at the end; the partial cache remains valid.
int cmd_extract(const ExtractOptions& options, std::ostream& out);

struct TrainOptions {
  std::filesystem::path manifest;
  RunConfig config;
  std::filesystem::path checkpoint_out;
  std::filesystem::path log_out;  // JSONL, one record per epoch
  // When set, the manifest is rewritten here with the resolved split labels
  // so later eval runs can target exactly the held-out rows.
  std::filesystem::path resolved_manifest_out;
};

int cmd_train(const TrainOptions& options, std::ostream& out);

struct PredictOptions {
  std::filesystem::path manifest;  // or a single video file
  std::filesystem::path checkpoint;
  RunConfig config;
  std::filesystem::path out_csv;
};

// CSV columns: video, Q, Q_1..Q_k. Refuses checkpoints whose provenance
// differs from the active configuration.
int cmd_predict(const PredictOptions& options, std::ostream& out);

struct EvalOptions {
  std::filesystem::path predictions;
  std::filesystem::path manifest;
  std::filesystem::path metrics_out;  // JSON
  std::filesystem::path scatter_out;  // CSV: pred, mos, fitted_pred
  std::string split = "";            // restrict to one split; empty = all rows
};

int cmd_eval(const EvalOptions& options, std::ostream& out);

struct AttrsOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_csv;
  bool normalize = false;  // min-max normalize each column across the manifest
};

int cmd_attrs(const AttrsOptions& options, std::ostream& out);

// Prediction rows as written by cmd_predict, re-parsed for evaluation.
struct PredictionRow {
  std::string video;
  double q = 0.0;
  std::vector<double> per_clip;
};

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path,
                                                std::string* config_hash_comment = nullptr);

}  // namespace lvqa
