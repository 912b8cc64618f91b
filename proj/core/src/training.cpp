#include "lvqa/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "lvqa/metrics.hpp"
#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

std::vector<double> widen(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

// Adam state for one parameter buffer.
struct AdamState {
  std::vector<double> m, v;

  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& p, const std::vector<double>& g, double lr, double t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

struct AdamOptimizer {
  AdamState fusion_w, fusion_b, reg1_w, reg1_b, reg2_w, reg2_b;
  double t = 0.0;

  explicit AdamOptimizer(const ModelParams& p)
      : fusion_w(p.fusion_w.size()),
        fusion_b(p.fusion_b.size()),
        reg1_w(p.reg1_w.size()),
        reg1_b(p.reg1_b.size()),
        reg2_w(p.reg2_w.size()),
        reg2_b(1) {}

  void step(ModelParams& p, const Gradients& g, double lr, double weight_decay) {
    t += 1.0;
    fusion_w.step(p.fusion_w, g.fusion_w, lr, t);
    fusion_b.step(p.fusion_b, g.fusion_b, lr, t);
    reg1_w.step(p.reg1_w, g.reg1_w, lr, t);
    reg1_b.step(p.reg1_b, g.reg1_b, lr, t);
    reg2_w.step(p.reg2_w, g.reg2_w, lr, t);
    std::vector<double> b2p{p.reg2_b}, b2g{g.reg2_b};
    reg2_b.step(b2p, b2g, lr, t);
    p.reg2_b = b2p[0];
    if (weight_decay > 0.0) {
      const double f = lr * weight_decay;
      for (double& w : p.fusion_w) w -= f * w;
      for (double& w : p.reg1_w) w -= f * w;
      for (double& w : p.reg2_w) w -= f * w;
    }
  }
};

void accumulate(Gradients& into, const Gradients& g) {
  auto add = [](std::vector<double>& a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  add(into.fusion_w, g.fusion_w);
  add(into.fusion_b, g.fusion_b);
  add(into.reg1_w, g.reg1_w);
  add(into.reg1_b, g.reg1_b);
  add(into.reg2_w, g.reg2_w);
  into.reg2_b += g.reg2_b;
}

}  // namespace

void LossConfig::validate() const {
  require(beta >= 0.0, ErrorCode::kConfig, "beta must be nonnegative");
  require(batch_size >= 1, ErrorCode::kConfig, "batch size must be >= 1");
  require(!(beta > 0.0 && batch_size < 2), ErrorCode::kConfig,
          "rank loss needs pairs: batch size must be >= 2 when beta > 0");
  require(epochs >= 0, ErrorCode::kConfig, "epochs must be nonnegative");
  require(learning_rate >= 0.0, ErrorCode::kConfig, "learning rate must be nonnegative");
  require(weight_decay >= 0.0, ErrorCode::kConfig, "weight decay must be nonnegative");
}

double mae_loss(const std::vector<double>& pred, const std::vector<double>& gt) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "mae: length mismatch");
  require(!pred.empty(), ErrorCode::kShapeMismatch, "mae: empty batch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += std::abs(gt[i] - pred[i]);
  return acc / pred.size();
}

double rank_loss(const std::vector<double>& pred, const std::vector<double>& gt,
                 RankSignSource sign) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "rank: length mismatch");
  require(pred.size() >= 2, ErrorCode::kShapeMismatch, "rank loss needs at least 2 samples");
  const size_t n = pred.size();
  const std::vector<double>& sign_src = (sign == RankSignSource::kPredictions) ? pred : gt;
  double acc = 0.0;
  for (size_t m = 0; m < n; ++m) {
    for (size_t k = 0; k < n; ++k) {
      const double e = sign_src[m] >= sign_src[k] ? 1.0 : -1.0;
      acc += std::max(0.0, std::abs(pred[m] - pred[k]) - e * (gt[m] - gt[k]));
    }
  }
  return acc / (static_cast<double>(n) * n);
}

double total_loss(const std::vector<double>& pred, const std::vector<double>& gt,
                  const LossConfig& config) {
  double loss = mae_loss(pred, gt);
  if (config.beta > 0.0) loss += config.beta * rank_loss(pred, gt, config.rank_sign);
  return loss;
}

std::vector<double> total_loss_gradient(const std::vector<double>& pred,
                                        const std::vector<double>& gt,
                                        const LossConfig& config) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "loss gradient: length mismatch");
  const size_t n = pred.size();
  std::vector<double> grad(n, 0.0);

  for (size_t m = 0; m < n; ++m) {
    const double r = pred[m] - gt[m];
    if (r > 0.0) grad[m] = 1.0 / n;
    else if (r < 0.0) grad[m] = -1.0 / n;
  }

  if (config.beta > 0.0 && n >= 2) {
    const std::vector<double>& sign_src =
        (config.rank_sign == RankSignSource::kPredictions) ? pred : gt;
    const double w = config.beta / (static_cast<double>(n) * n);
    for (size_t m = 0; m < n; ++m) {
      for (size_t k = 0; k < n; ++k) {
        const double e = sign_src[m] >= sign_src[k] ? 1.0 : -1.0;
        const double arg = std::abs(pred[m] - pred[k]) - e * (gt[m] - gt[k]);
        if (arg <= 0.0) continue;
        const double diff = pred[m] - pred[k];
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        grad[m] += w * s;
        grad[k] -= w * s;
      }
    }
  }
  return grad;
}

Split make_split(const std::vector<std::string>& source_ids,
                 const std::vector<std::string>& explicit_splits,
                 const std::array<double, 3>& ratios, uint64_t seed) {
  require(source_ids.size() == explicit_splits.size(), ErrorCode::kShapeMismatch,
          "split inputs disagree in length");
  require(!source_ids.empty(), ErrorCode::kConfig, "cannot split an empty manifest");
  const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  require(std::abs(ratio_sum - 1.0) <= 1e-9, ErrorCode::kConfig, "split ratios must sum to 1");

  // Group indices by source id, preserving first-appearance order.
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < source_ids.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(source_ids[i]);
    if (inserted) group_order.push_back(source_ids[i]);
    it->second.push_back(i);
  }

  // Honor explicit assignments; a group follows its explicitly tagged rows.
  Split split;
  std::vector<std::string> auto_groups;
  for (const std::string& gid : group_order) {
    std::string forced;
    for (size_t idx : groups[gid]) {
      const std::string& s = explicit_splits[idx];
      if (s.empty() || s == "auto") continue;
      require(s == "train" || s == "val" || s == "test", ErrorCode::kConfig,
              "unknown split label '" + s + "' for source " + gid);
      require(forced.empty() || forced == s, ErrorCode::kConfig,
              "source " + gid + " has conflicting explicit splits");
      forced = s;
    }
    if (forced.empty()) {
      auto_groups.push_back(gid);
    } else if (forced == "train") {
      for (size_t idx : groups[gid]) split.train.push_back(idx);
    } else if (forced == "val") {
      for (size_t idx : groups[gid]) split.val.push_back(idx);
    } else {
      for (size_t idx : groups[gid]) split.test.push_back(idx);
    }
  }

  Rng rng(Rng::derive(seed, 0x5917));
  rng.shuffle(auto_groups);
  const size_t g = auto_groups.size();
  const size_t n_val = static_cast<size_t>(ratios[1] * g);
  const size_t n_test = static_cast<size_t>(ratios[2] * g);
  const size_t n_train = g - n_val - n_test;  // floor + remainder to train
  for (size_t i = 0; i < g; ++i) {
    auto& bucket = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
    for (size_t idx : groups[auto_groups[i]]) bucket.push_back(idx);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double predict_video(const ModelParams& params, const TrainSample& sample) {
  return score_video(predict_clips(params, sample));
}

std::vector<double> predict_clips(const ModelParams& params, const TrainSample& sample) {
  require(sample.si.size() == sample.ti.size() && !sample.si.empty(), ErrorCode::kShapeMismatch,
          "sample must carry matching si/ti vectors per clip");
  std::vector<double> scores;
  scores.reserve(sample.si.size());
  for (size_t i = 0; i < sample.si.size(); ++i) {
    const std::vector<double> ff = fuse(widen(sample.si[i]), widen(sample.ti[i]), params);
    scores.push_back(regress_clip(ff, params));
  }
  return scores;
}

TrainResult train_head(const std::vector<TrainSample>& train_set,
                       const std::vector<TrainSample>& val_set, const HeadLayout& layout,
                       const LossConfig& config) {
  config.validate();
  require(!train_set.empty(), ErrorCode::kConfig, "training set is empty");
  const uint32_t input_dim =
      static_cast<uint32_t>(train_set.front().si.front().size() + train_set.front().ti.front().size());
  for (const TrainSample& s : train_set) {
    require(!s.si.empty() && s.si.size() == s.ti.size(), ErrorCode::kShapeMismatch,
            "every sample needs matching si/ti clip vectors");
    require(s.si.front().size() + s.ti.front().size() == input_dim, ErrorCode::kCompatibility,
            "feature dimension drift across training samples");
  }

  TrainResult result;
  result.params = init_params(input_dim, layout.fusion_dim, layout.hidden_dim, config.seed);

  // Per-dimension standardization over all training clips; frozen into the
  // parameters so prediction applies the identical transform.
  {
    std::vector<double> mean(input_dim, 0.0), sq(input_dim, 0.0);
    size_t count = 0;
    for (const TrainSample& s : train_set) {
      for (size_t c = 0; c < s.si.size(); ++c) {
        size_t d = 0;
        for (float v : s.si[c]) {
          mean[d] += v;
          sq[d] += static_cast<double>(v) * v;
          ++d;
        }
        for (float v : s.ti[c]) {
          mean[d] += v;
          sq[d] += static_cast<double>(v) * v;
          ++d;
        }
        ++count;
      }
    }
    result.params.input_shift.resize(input_dim);
    result.params.input_scale.resize(input_dim);
    for (uint32_t d = 0; d < input_dim; ++d) {
      mean[d] /= count;
      const double var = std::max(0.0, sq[d] / count - mean[d] * mean[d]);
      result.params.input_shift[d] = mean[d];
      result.params.input_scale[d] = std::max(std::sqrt(var), 1e-8);
    }
  }

  AdamOptimizer opt(result.params);
  Rng shuffle_rng(Rng::derive(config.seed, 0xEF0C));

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double best_val = -2.0;
  ModelParams best_params = result.params;
  int best_epoch = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0, epoch_mae = 0.0, epoch_rank = 0.0;
    size_t batches = 0;

    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      const size_t n = end - start;

      BatchTape tape;
      std::vector<double> pred(n), gt(n);
      std::vector<size_t> clip_count(n);
      for (size_t b = 0; b < n; ++b) {
        const TrainSample& sample = train_set[order[start + b]];
        double sum = 0.0;
        for (size_t i = 0; i < sample.si.size(); ++i) {
          sum += tape.forward(result.params, widen(sample.si[i]), widen(sample.ti[i]));
        }
        clip_count[b] = sample.si.size();
        pred[b] = sum / sample.si.size();
        gt[b] = sample.mos;
      }

      LossConfig batch_config = config;
      if (n < 2) batch_config.beta = 0.0;  // rank term needs pairs
      const double mae = mae_loss(pred, gt);
      const double rank = n >= 2 ? rank_loss(pred, gt, config.rank_sign) : 0.0;
      epoch_mae += mae;
      epoch_rank += rank;
      epoch_loss += mae + batch_config.beta * rank;
      ++batches;

      const std::vector<double> dq_video = total_loss_gradient(pred, gt, batch_config);
      std::vector<double> dq_clip;
      dq_clip.reserve(tape.size());
      for (size_t b = 0; b < n; ++b) {
        const double per_clip = dq_video[b] / static_cast<double>(clip_count[b]);
        for (size_t i = 0; i < clip_count[b]; ++i) dq_clip.push_back(per_clip);
      }
      const Gradients grads = tape.backward(result.params, dq_clip);
      opt.step(result.params, grads, config.learning_rate, config.weight_decay);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / batches;
    log.train_mae = epoch_mae / batches;
    log.train_rank = epoch_rank / batches;

    if (val_set.size() >= 3) {
      std::vector<double> vp(val_set.size()), vg(val_set.size());
      for (size_t i = 0; i < val_set.size(); ++i) {
        vp[i] = predict_video(result.params, val_set[i]);
        vg[i] = val_set[i].mos;
      }
      try {
        log.val_srcc = srcc(vp, vg);
        log.val_plcc = plcc(vp, vg);
      } catch (const Error&) {
        // constant predictions early in training: leave correlation unset
      }
      log.val_rmse = rmse(vp, vg);
      if (log.val_srcc && *log.val_srcc > best_val) {
        best_val = *log.val_srcc;
        best_params = result.params;
        best_epoch = epoch;
      }
    }
    result.log.push_back(log);
  }

  if (best_val > -2.0) {
    result.params = best_params;
    result.best_epoch = best_epoch;
  } else {
    result.best_epoch = config.epochs > 0 ? config.epochs - 1 : 0;
  }
  return result;
}

MlrBaseline fit_mlr_baseline(const std::vector<double>& spatial_scores,
                             const std::vector<double>& temporal_scores,
                             const std::vector<double>& gt) {
  require(spatial_scores.size() == temporal_scores.size() && spatial_scores.size() == gt.size(),
          ErrorCode::kShapeMismatch, "mlr fit: length mismatch");
  require(gt.size() >= 3, ErrorCode::kShapeMismatch, "mlr fit needs at least 3 samples");

  // Normal equations for [a b c] over the design [qs qt 1], ridge 1e-9.
  const size_t n = gt.size();
  double sss = 0, sst = 0, ss1 = 0, stt = 0, st1 = 0;
  double rs = 0, rt = 0, r1 = 0;
  for (size_t i = 0; i < n; ++i) {
    const double qs = spatial_scores[i], qt = temporal_scores[i], y = gt[i];
    sss += qs * qs;
    sst += qs * qt;
    ss1 += qs;
    stt += qt * qt;
    st1 += qt;
    rs += qs * y;
    rt += qt * y;
    r1 += y;
  }
  std::vector<double> a = {sss + 1e-9, sst, ss1, sst, stt + 1e-9, st1, ss1, st1,
                           static_cast<double>(n) + 1e-9};
  std::vector<double> rhs = {rs, rt, r1};

  // 3x3 Gaussian elimination with partial pivoting.
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r * 3 + col]) > std::abs(a[pivot * 3 + col])) pivot = r;
    }
    if (std::abs(a[pivot * 3 + col]) < 1e-30) {
      throw Error(ErrorCode::kFitFailure, "mlr design matrix is degenerate");
    }
    if (pivot != col) {
      for (int c = 0; c < 3; ++c) std::swap(a[col * 3 + c], a[pivot * 3 + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r * 3 + col] / a[col * 3 + col];
      for (int c = col; c < 3; ++c) a[r * 3 + c] -= f * a[col * 3 + c];
      rhs[r] -= f * rhs[col];
    }
  }
  double x[3];
  for (int r = 2; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r * 3 + c] * x[c];
    x[r] = acc / a[r * 3 + r];
  }
  return MlrBaseline{x[0], x[1], x[2]};
}

}  // namespace lvqa
