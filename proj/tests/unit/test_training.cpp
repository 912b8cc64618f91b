#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "lvqa/metrics.hpp"
#include "lvqa/rng.hpp"
#include "lvqa/training.hpp"
#include "oracles.hpp"

using namespace lvqa;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = 0.0, double hi = 100.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Synthetic head-training set: MOS is a fixed linear readout of the feature
// vector, so a tiny head can represent it exactly.
std::vector<TrainSample> synthetic_samples(size_t n, size_t clips, size_t d_si, size_t d_ti,
                                           uint64_t seed) {
  Rng rng(seed);
  std::vector<double> readout(d_si + d_ti);
  for (double& w : readout) w = rng.uniform(-1.0, 1.0);

  std::vector<TrainSample> samples(n);
  for (TrainSample& s : samples) {
    double mos = 0.0;
    for (size_t c = 0; c < clips; ++c) {
      std::vector<float> si(d_si), ti(d_ti);
      double dot = 0.0;
      size_t j = 0;
      for (float& v : si) {
        v = static_cast<float>(rng.uniform(0.0, 1.0));
        dot += readout[j++] * v;
      }
      for (float& v : ti) {
        v = static_cast<float>(rng.uniform(0.0, 1.0));
        dot += readout[j++] * v;
      }
      s.si.push_back(std::move(si));
      s.ti.push_back(std::move(ti));
      mos += 40.0 + 30.0 * dot;
    }
    s.mos = mos / clips;
  }
  return samples;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  return a.fusion_w == b.fusion_w && a.fusion_b == b.fusion_b && a.reg1_w == b.reg1_w &&
         a.reg1_b == b.reg1_b && a.reg2_w == b.reg2_w && a.reg2_b == b.reg2_b;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("mae loss examples") {
  CHECK(mae_loss({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(mae_loss({1, 2}, {2, 4}) == doctest::Approx(1.5).epsilon(1e-15));
  // homogeneity: scaling all residuals by 2 doubles the loss
  CHECK(mae_loss({0, 0}, {2, 4}) == doctest::Approx(2.0 * mae_loss({0, 0}, {1, 2})).epsilon(1e-15));
  CHECK_THROWS_AS(mae_loss({1}, {1, 2}), Error);
}

TEST_CASE("rank loss follows the printed formula exactly") {
  CHECK(rank_loss({5, 1}, {1, 5}) == 4.0);
  CHECK(rank_loss({5, 1}, {5, 1}) == 0.0);
  CHECK(rank_loss({1, 2, 7}, {10, 20, 70}) == 0.0);  // concordant, gaps smaller than gt gaps
  CHECK_THROWS_AS(rank_loss({1}, {1}), Error);
}

TEST_CASE("rank loss is zero when predictions equal ground truth") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto v = random_vec(rng, 2 + rng.next_below(8));
    CHECK(rank_loss(v, v) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rank loss ignores a common constant shift") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto pred = random_vec(rng, 6);
    const auto gt = random_vec(rng, 6);
    std::vector<double> pred_shift(6), gt_shift(6);
    for (int i = 0; i < 6; ++i) {
      pred_shift[i] = pred[i] + 31.0;
      gt_shift[i] = gt[i] + 12.0;
    }
    CHECK(rank_loss(pred_shift, gt_shift) == doctest::Approx(rank_loss(pred, gt)).epsilon(1e-9));
  }
}

TEST_CASE("rank loss sign source flag flips e to ground truth") {
  // pred says m > n, gt says m < n: verbatim e = +1, gt-sign e = -1.
  const std::vector<double> pred = {5, 1};
  const std::vector<double> gt = {1, 5};
  CHECK(rank_loss(pred, gt, RankSignSource::kPredictions) == 4.0);
  CHECK(rank_loss(pred, gt, RankSignSource::kGroundTruth) == 0.0);
}

TEST_CASE("total loss composes mae and rank") {
  LossConfig config;
  config.beta = 0.0;
  const std::vector<double> pred = {1, 2};
  const std::vector<double> gt = {2, 4};
  CHECK(total_loss(pred, gt, config) == doctest::Approx(mae_loss(pred, gt)).epsilon(1e-15));

  config.beta = 0.5;
  CHECK(total_loss({5, 1}, {1, 5}, config) ==
        doctest::Approx(mae_loss({5, 1}, {1, 5}) + 0.5 * 4.0).epsilon(1e-12));
  CHECK(total_loss({3.5, 7.0}, {3.5, 7.0}, config) == 0.0);

  // the spec's arithmetic example: components 1.5 and 4.0 at beta 0.5
  CHECK(1.5 + 0.5 * 4.0 == 3.5);
}

TEST_CASE("total loss is nonnegative") {
  Rng rng(7);
  LossConfig config;
  config.beta = 0.7;
  for (int rep = 0; rep < 30; ++rep) {
    const auto pred = random_vec(rng, 5);
    const auto gt = random_vec(rng, 5);
    CHECK(total_loss(pred, gt, config) >= 0.0);
  }
}

TEST_CASE("loss gradient matches finite differences, rank active") {
  Rng rng(9);
  LossConfig config;
  config.beta = 0.6;
  for (int rep = 0; rep < 25; ++rep) {
    auto pred = random_vec(rng, 5, 0.0, 10.0);
    const auto gt = random_vec(rng, 5, 0.0, 10.0);
    const auto grad = total_loss_gradient(pred, gt, config);
    const double h = 1e-6;
    for (size_t i = 0; i < pred.size(); ++i) {
      const double saved = pred[i];
      pred[i] = saved + h;
      const double up = total_loss(pred, gt, config);
      pred[i] = saved - h;
      const double down = total_loss(pred, gt, config);
      pred[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("make_split: 10 groups at (0.6,0.2,0.2) give 6/2/2") {
  std::vector<std::string> sources, splits;
  for (int g = 0; g < 10; ++g) {
    for (int v = 0; v < 4; ++v) {
      sources.push_back("src" + std::to_string(g));
      splits.push_back("auto");
    }
  }
  const Split split = make_split(sources, splits, {0.6, 0.2, 0.2}, 11);
  CHECK(split.train.size() == 24);
  CHECK(split.val.size() == 8);
  CHECK(split.test.size() == 8);

  const Split again = make_split(sources, splits, {0.6, 0.2, 0.2}, 11);
  CHECK(split.train == again.train);
  CHECK(split.val == again.val);
  CHECK(split.test == again.test);

  const Split other = make_split(sources, splits, {0.6, 0.2, 0.2}, 12);
  CHECK(split.train != other.train);
}

TEST_CASE("make_split never separates a source group") {
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::string> sources, splits;
    const int groups = 2 + static_cast<int>(rng.next_below(12));
    for (int g = 0; g < groups; ++g) {
      const int variants = 1 + static_cast<int>(rng.next_below(5));
      for (int v = 0; v < variants; ++v) {
        sources.push_back("s" + std::to_string(g));
        splits.push_back("auto");
      }
    }
    const Split split = make_split(sources, splits, {0.6, 0.2, 0.2}, rng.next_u64());

    std::map<std::string, std::set<int>> buckets;
    for (size_t i : split.train) buckets[sources[i]].insert(0);
    for (size_t i : split.val) buckets[sources[i]].insert(1);
    for (size_t i : split.test) buckets[sources[i]].insert(2);
    for (const auto& [sid, b] : buckets) CHECK(b.size() == 1);

    CHECK(split.train.size() + split.val.size() + split.test.size() == sources.size());
  }
}

TEST_CASE("make_split honors explicit assignments") {
  const std::vector<std::string> sources = {"a", "a", "b", "b", "c"};
  const std::vector<std::string> splits = {"test", "test", "auto", "auto", "auto"};
  const Split split = make_split(sources, splits, {1.0, 0.0, 0.0}, 1);
  CHECK(split.test == std::vector<size_t>{0, 1});
  CHECK(split.train == std::vector<size_t>{2, 3, 4});

  const std::vector<std::string> conflicting = {"test", "val", "auto", "auto", "auto"};
  CHECK_THROWS_AS(make_split(sources, conflicting, {1.0, 0.0, 0.0}, 1), Error);
}

TEST_CASE("zero learning rate is an optimizer fixed point") {
  const auto samples = synthetic_samples(6, 2, 3, 2, 21);
  LossConfig config;
  config.epochs = 4;
  config.learning_rate = 0.0;
  config.batch_size = 6;  // single batch per epoch
  config.seed = 5;
  const HeadLayout layout{8, 4};
  const TrainResult result = train_head(samples, {}, layout, config);

  const ModelParams fresh = init_params(5, 8, 4, config.seed);
  CHECK(params_equal(result.params, fresh));
  REQUIRE(result.log.size() == 4);
  for (const EpochLog& e : result.log) {
    CHECK(e.train_loss == doctest::Approx(result.log[0].train_loss).epsilon(1e-15));
  }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  const auto samples = synthetic_samples(8, 2, 3, 2, 22);
  const auto val = synthetic_samples(4, 2, 3, 2, 23);
  LossConfig config;
  config.epochs = 12;
  config.batch_size = 4;
  config.seed = 77;
  const HeadLayout layout{8, 4};
  const TrainResult a = train_head(samples, val, layout, config);
  const TrainResult b = train_head(samples, val, layout, config);
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);  // exact
    CHECK(a.log[i].val_srcc == b.log[i].val_srcc);
  }
}

TEST_CASE("training reduces the loss on a learnable problem") {
  const auto samples = synthetic_samples(16, 2, 4, 3, 31);
  LossConfig config;
  config.epochs = 150;
  config.batch_size = 4;
  config.seed = 3;
  config.learning_rate = 1e-2;
  const HeadLayout layout{16, 8};
  const TrainResult result = train_head(samples, {}, layout, config);
  CHECK(result.log.back().train_loss < 0.5 * result.log.front().train_loss);

  std::vector<double> pred, gt;
  for (const TrainSample& s : samples) {
    pred.push_back(predict_video(result.params, s));
    gt.push_back(s.mos);
  }
  CHECK(srcc(pred, gt) > 0.8);
}

TEST_CASE("feature dimension drift is a compatibility error") {
  auto samples = synthetic_samples(4, 2, 3, 2, 41);
  samples[2].si[0].push_back(0.5f);
  samples[2].si[1].push_back(0.5f);
  LossConfig config;
  config.epochs = 1;
  CHECK_THROWS_AS(train_head(samples, {}, HeadLayout{4, 2}, config), Error);
}

TEST_CASE("mlr baseline recovers an exact linear relation") {
  Rng rng(51);
  const auto qs = random_vec(rng, 20);
  const auto qt = random_vec(rng, 20);
  std::vector<double> gt(20);
  for (size_t i = 0; i < 20; ++i) gt[i] = 2.0 * qs[i] + 0.0 * qt[i] + 1.0;
  const MlrBaseline fit = fit_mlr_baseline(qs, qt, gt);
  CHECK(fit.a == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fit.b == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(fit.c == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mlr baseline survives collinear inputs via the ridge") {
  const std::vector<double> qs = {1, 2, 3, 4};
  const std::vector<double> gt = {2, 4, 6, 8};
  const MlrBaseline fit = fit_mlr_baseline(qs, qs, gt);  // qt == qs
  CHECK(std::isfinite(fit.a));
  CHECK(std::isfinite(fit.b));
  CHECK(std::isfinite(fit.c));
  // combined slope still explains the data
  for (size_t i = 0; i < qs.size(); ++i) {
    CHECK(fit.a * qs[i] + fit.b * qs[i] + fit.c == doctest::Approx(gt[i]).epsilon(1e-3));
  }
}

TEST_CASE("mlr baseline matches the Cramer-rule oracle") {
  Rng rng(53);
  for (int rep = 0; rep < 20; ++rep) {
    const auto qs = random_vec(rng, 12);
    auto qt = random_vec(rng, 12);
    const auto gt = random_vec(rng, 12);
    const MlrBaseline fit = fit_mlr_baseline(qs, qt, gt);
    const oracles::MlrOracle expected = oracles::mlr_by_cramer(qs, qt, gt);
    const double scale =
        std::max({1.0, std::fabs(expected.a), std::fabs(expected.b), std::fabs(expected.c)});
    CHECK(std::fabs(fit.a - expected.a) / scale <= 1e-9);
    CHECK(std::fabs(fit.b - expected.b) / scale <= 1e-9);
    CHECK(std::fabs(fit.c - expected.c) / scale <= 1e-9);
  }
}

TEST_CASE("loss config validation") {
  LossConfig config;
  config.beta = 0.5;
  config.batch_size = 1;
  CHECK_THROWS_AS(config.validate(), Error);
  config.beta = 0.0;
  CHECK_NOTHROW(config.validate());
  config.batch_size = 0;
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_SUITE_END();
