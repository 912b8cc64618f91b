#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lvqa/model.hpp"

namespace lvqa {

// Which scores decide the sign term e(.,.) of the rank loss. The published
// formula puts it on predictions; the conventional pairwise hinge puts it on
// ground truth. Default follows the formula as printed.
enum class RankSignSource { kPredictions, kGroundTruth };

struct LossConfig {
  double beta = 0.5;       // rank-loss weight
  int batch_size = 8;      // videos per batch, >= 2 whenever beta > 0
  int epochs = 200;
  double learning_rate = 1e-3;
  // Decoupled L2 decay on the weight matrices (biases exempt); keeps the
  // wide fusion layer from memorizing scene identity on small corpora.
  double weight_decay = 1e-3;
  uint64_t seed = 1;
  RankSignSource rank_sign = RankSignSource::kPredictions;

  void validate() const;
};

// (1/N) sum |gt_m - pred_m|.
double mae_loss(const std::vector<double>& pred, const std::vector<double>& gt);

// (1/N^2) sum_m sum_n max(0, |pred_m - pred_n| - e(m,n) * (gt_m - gt_n)),
// with e(m,n) = +1 when the sign-source scores satisfy s_m >= s_n, else -1.
// Diagonal terms are included (they are zero). Requires N >= 2.
double rank_loss(const std::vector<double>& pred, const std::vector<double>& gt,
                 RankSignSource sign = RankSignSource::kPredictions);

// mae + beta * rank.
double total_loss(const std::vector<double>& pred, const std::vector<double>& gt,
                  const LossConfig& config);

// Subgradient of total_loss with respect to the predictions. The max(0,.)
// inactive branch and |.| at 0 contribute 0; e is a constant of the forward
// pass.
std::vector<double> total_loss_gradient(const std::vector<double>& pred,
                                        const std::vector<double>& gt, const LossConfig& config);

struct Split {
  std::vector<size_t> train, val, test;
};

// Groups manifest indices by source id, shuffles the groups with the seed,
// and assigns floor(ratio*G) groups to val and test, remainder to train.
// Entries with an explicit split keep it; their whole group follows.
Split make_split(const std::vector<std::string>& source_ids,
                 const std::vector<std::string>& explicit_splits,
                 const std::array<double, 3>& ratios, uint64_t seed);

// One video ready for head training: per-clip spatial and temporal
// information (already sliced for any ablation) plus the target score.
struct TrainSample {
  std::vector<std::vector<float>> si;  // k vectors
  std::vector<std::vector<float>> ti;  // k vectors
  double mos = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_mae = 0.0;
  double train_rank = 0.0;
  std::optional<double> val_srcc;
  std::optional<double> val_plcc;
  std::optional<double> val_rmse;
};

struct TrainResult {
  ModelParams params;  // best-validation checkpoint (final epoch if no val set)
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

struct HeadLayout {
  uint32_t fusion_dim = 1024;
  uint32_t hidden_dim = 128;
};

// Adam over mini-batches of video-level predictions; validation SRCC is
// monitored each epoch and the best-validation parameters are returned.
// Deterministic: (seed, data, config) fixes every logged number.
TrainResult train_head(const std::vector<TrainSample>& train_set,
                       const std::vector<TrainSample>& val_set, const HeadLayout& layout,
                       const LossConfig& config);

// Video-level score under the given parameters (mean of per-clip scores).
double predict_video(const ModelParams& params, const TrainSample& sample);
std::vector<double> predict_clips(const ModelParams& params, const TrainSample& sample);

struct MlrBaseline {
  double a = 0.0, b = 0.0, c = 0.0;
};

// OLS fit of gt ~ a*spatial + b*temporal + c via normal equations with
// ridge 1e-9 on the diagonal. Requires >= 3 samples.
MlrBaseline fit_mlr_baseline(const std::vector<double>& spatial_scores,
                             const std::vector<double>& temporal_scores,
                             const std::vector<double>& gt);

}  // namespace lvqa
