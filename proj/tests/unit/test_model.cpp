#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lvqa/model.hpp"
#include "lvqa/rng.hpp"
#include "oracles.hpp"

using namespace lvqa;

namespace {

ModelParams small_params(uint32_t input, uint32_t fusion, uint32_t hidden, uint64_t seed) {
  return init_params(input, fusion, hidden, seed);
}

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Forward pass recomputed from scratch for finite differencing.
double forward_scalar(const ModelParams& p, const std::vector<double>& si,
                      const std::vector<double>& ti) {
  return regress_clip(fuse(si, ti, p), p);
}

struct ParamRef {
  double* ptr;
};

std::vector<ParamRef> all_params(ModelParams& p) {
  std::vector<ParamRef> refs;
  for (auto* vec : {&p.fusion_w, &p.fusion_b, &p.reg1_w, &p.reg1_b, &p.reg2_w}) {
    for (double& v : *vec) refs.push_back({&v});
  }
  refs.push_back({&p.reg2_b});
  return refs;
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> flat;
  for (const auto* vec : {&g.fusion_w, &g.fusion_b, &g.reg1_w, &g.reg1_b, &g.reg2_w}) {
    flat.insert(flat.end(), vec->begin(), vec->end());
  }
  flat.push_back(g.reg2_b);
  return flat;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("fuse: zero weights pass the bias through the ReLU") {
  ModelParams p = small_params(4, 6, 3, 1);
  std::fill(p.fusion_w.begin(), p.fusion_w.end(), 0.0);
  for (size_t i = 0; i < p.fusion_b.size(); ++i) p.fusion_b[i] = (i % 2 == 0) ? 1.5 : -2.0;
  const auto ff = fuse({0, 0}, {0, 0}, p);
  for (size_t i = 0; i < ff.size(); ++i) CHECK(ff[i] == (i % 2 == 0 ? 1.5 : 0.0));
}

TEST_CASE("fuse: identity-like weights copy a nonnegative input") {
  ModelParams p = small_params(3, 5, 2, 1);
  std::fill(p.fusion_w.begin(), p.fusion_w.end(), 0.0);
  std::fill(p.fusion_b.begin(), p.fusion_b.end(), 0.0);
  for (uint32_t i = 0; i < 3; ++i) p.fusion_w[i * 3 + i] = 1.0;  // first 3 rows unit
  const auto ff = fuse({0.5, 1.25}, {2.0}, p);
  CHECK(ff[0] == 0.5);
  CHECK(ff[1] == 1.25);
  CHECK(ff[2] == 2.0);
  CHECK(ff[3] == 0.0);
  CHECK(ff[4] == 0.0);
}

TEST_CASE("fuse matches a naive matvec oracle") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    ModelParams p = small_params(7, 9, 3, rng.next_u64());
    const auto si = random_vec(rng, 4);
    const auto ti = random_vec(rng, 3);
    std::vector<double> x = si;
    x.insert(x.end(), ti.begin(), ti.end());
    auto expected = oracles::matvec_direct(p.fusion_w, p.fusion_b, x);
    for (double& v : expected) v = std::max(0.0, v);
    const auto got = fuse(si, ti, p);
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
      CHECK(got[i] >= 0.0);  // post-ReLU nonnegativity
    }
  }
}

TEST_CASE("fuse rejects mismatched dimensions with a descriptive error") {
  const ModelParams p = small_params(5, 4, 2, 3);
  try {
    fuse({1.0, 2.0}, {3.0}, p);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
    CHECK(std::string(e.what()).find("expected 5") != std::string::npos);
    CHECK(std::string(e.what()).find("got 3") != std::string::npos);
  }
}

TEST_CASE("regress_clip: zero parameters and bias passthrough") {
  ModelParams p = small_params(2, 3, 4, 1);
  std::fill(p.fusion_w.begin(), p.fusion_w.end(), 0.0);
  std::fill(p.reg1_w.begin(), p.reg1_w.end(), 0.0);
  std::fill(p.reg2_w.begin(), p.reg2_w.end(), 0.0);
  p.reg2_b = 0.0;
  CHECK(regress_clip({1.0, 2.0, 3.0}, p) == 0.0);
  p.reg2_b = 3.5;
  CHECK(regress_clip({1.0, 2.0, 3.0}, p) == 3.5);
}

TEST_CASE("regress_clip matches a naive two-layer oracle") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelParams p = small_params(3, 6, 4, rng.next_u64());
    const auto ff = random_vec(rng, 6, 0.0, 2.0);
    auto hidden = oracles::matvec_direct(p.reg1_w, p.reg1_b, ff);
    for (double& v : hidden) v = std::max(0.0, v);
    double expected = p.reg2_b;
    for (size_t i = 0; i < hidden.size(); ++i) expected += p.reg2_w[i] * hidden[i];
    CHECK(regress_clip(ff, p) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("score_video averages per-clip scores") {
  CHECK(score_video({50, 50, 50, 50}) == 50.0);
  CHECK(score_video({10, 20, 30}) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(score_video({-3.25}) == -3.25);
  CHECK_THROWS_AS(score_video({}), Error);
}

TEST_CASE("clip order permutes Q_i but leaves Q unchanged") {
  Rng rng(6);
  const ModelParams p = small_params(5, 8, 4, 77);
  std::vector<std::vector<double>> sis, tis;
  for (int i = 0; i < 6; ++i) {
    sis.push_back(random_vec(rng, 3));
    tis.push_back(random_vec(rng, 2));
  }
  std::vector<double> scores;
  for (int i = 0; i < 6; ++i) scores.push_back(forward_scalar(p, sis[i], tis[i]));
  const double q = score_video(scores);

  std::vector<size_t> perm = {3, 0, 5, 1, 4, 2};
  std::vector<double> permuted;
  for (size_t i : perm) permuted.push_back(scores[i]);
  CHECK(score_video(permuted) == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("backward: gradients match central finite differences") {
  Rng rng(8);
  int checked = 0;
  int instances = 0;
  while (instances < 12) {
    const uint32_t input = 3 + static_cast<uint32_t>(rng.next_below(3));
    const uint32_t fusion = 4 + static_cast<uint32_t>(rng.next_below(3));
    const uint32_t hidden = 2 + static_cast<uint32_t>(rng.next_below(2));
    ModelParams p = init_params(input, fusion, hidden, rng.next_u64());

    const size_t clips = 1 + rng.next_below(3);
    std::vector<std::vector<double>> sis, tis;
    std::vector<double> dq;
    for (size_t c = 0; c < clips; ++c) {
      sis.push_back(random_vec(rng, input - 1));
      tis.push_back(random_vec(rng, 1));
      dq.push_back(rng.uniform(-1.0, 1.0));
    }

    // Finite differences are only valid away from the ReLU kinks; skip
    // instances with any pre-activation near zero.
    bool near_kink = false;
    for (size_t c = 0; c < clips && !near_kink; ++c) {
      std::vector<double> x = sis[c];
      x.insert(x.end(), tis[c].begin(), tis[c].end());
      const auto pre_f = oracles::matvec_direct(p.fusion_w, p.fusion_b, x);
      std::vector<double> ff(pre_f.size());
      for (size_t i = 0; i < pre_f.size(); ++i) {
        if (std::fabs(pre_f[i]) < 1e-3) near_kink = true;
        ff[i] = std::max(0.0, pre_f[i]);
      }
      for (double pre : oracles::matvec_direct(p.reg1_w, p.reg1_b, ff)) {
        if (std::fabs(pre) < 1e-3) near_kink = true;
      }
    }
    if (near_kink) continue;
    ++instances;

    BatchTape tape;
    for (size_t c = 0; c < clips; ++c) tape.forward(p, sis[c], tis[c]);
    const std::vector<double> analytic = flatten(tape.backward(p, dq));

    // loss = sum_c dq[c] * q_c, so dloss/dtheta has upstream gradient dq
    auto loss = [&](ModelParams& params) {
      double acc = 0.0;
      for (size_t c = 0; c < clips; ++c) acc += dq[c] * forward_scalar(params, sis[c], tis[c]);
      return acc;
    };
    const auto refs = all_params(p);
    REQUIRE(analytic.size() == refs.size());
    const double h = 1e-5;
    for (size_t i = 0; i < refs.size(); ++i) {
      const double saved = *refs[i].ptr;
      *refs[i].ptr = saved + h;
      const double up = loss(p);
      *refs[i].ptr = saved - h;
      const double down = loss(p);
      *refs[i].ptr = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({1e-6, std::fabs(fd), std::fabs(analytic[i])});
      CHECK(std::fabs(fd - analytic[i]) / scale < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 400);
}

TEST_CASE("backward: dead ReLU paths have zero gradients") {
  ModelParams p = small_params(2, 3, 2, 5);
  // Force all fusion pre-activations negative: zero weights, negative bias.
  std::fill(p.fusion_w.begin(), p.fusion_w.end(), 0.0);
  std::fill(p.fusion_b.begin(), p.fusion_b.end(), -1.0);
  BatchTape tape;
  tape.forward(p, {1.0}, {2.0});
  const Gradients g = tape.backward(p, {1.0});
  for (double v : g.fusion_w) CHECK(v == 0.0);
  for (double v : g.fusion_b) CHECK(v == 0.0);
  for (double v : g.reg1_w) CHECK(v == 0.0);  // ff is all zero
  CHECK(g.reg2_b == 1.0);                     // bias path stays alive
}

TEST_CASE("backward: doubling the upstream gradient doubles every entry") {
  Rng rng(10);
  ModelParams p = small_params(4, 5, 3, 9);
  BatchTape tape;
  tape.forward(p, random_vec(rng, 2), random_vec(rng, 2));
  tape.forward(p, random_vec(rng, 2), random_vec(rng, 2));
  const auto g1 = flatten(tape.backward(p, {0.3, -0.7}));
  const auto g2 = flatten(tape.backward(p, {0.6, -1.4}));
  for (size_t i = 0; i < g1.size(); ++i) {
    CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward without forward is a state error") {
  const ModelParams p = small_params(2, 2, 2, 1);
  BatchTape tape;
  try {
    tape.backward(p, {1.0});
    FAIL("expected state error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kState);
  }
  tape.forward(p, {1.0}, {1.0});
  CHECK_THROWS_AS(tape.backward(p, {1.0, 2.0}), Error);  // count mismatch
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  helpers::TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.fusion = "mlp";
  ckpt.provenance = "semantic=builtin-semantic:seed=1:dim=48;k=8";
  ckpt.config_hash = "0123456789abcdef";
  ckpt.head = small_params(7, 6, 3, 21);
  const auto path = dir.path() / "m.lvqm";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.fusion == ckpt.fusion);
  CHECK(loaded.provenance == ckpt.provenance);
  CHECK(loaded.config_hash == ckpt.config_hash);
  CHECK(loaded.head.fusion_w == ckpt.head.fusion_w);
  CHECK(loaded.head.fusion_b == ckpt.head.fusion_b);
  CHECK(loaded.head.reg1_w == ckpt.head.reg1_w);
  CHECK(loaded.head.reg1_b == ckpt.head.reg1_b);
  CHECK(loaded.head.reg2_w == ckpt.head.reg2_w);
  CHECK(loaded.head.reg2_b == ckpt.head.reg2_b);

  // save twice -> identical bytes
  const auto path2 = dir.path() / "m2.lvqm";
  save_checkpoint(path2, ckpt);
  CHECK(helpers::read_file(path) == helpers::read_file(path2));
}

TEST_CASE("mlr checkpoints carry both heads and the combination") {
  helpers::TempDir dir("ckpt-mlr");
  Checkpoint ckpt;
  ckpt.fusion = "mlr";
  ckpt.head = small_params(3, 4, 2, 1);
  ckpt.temporal = small_params(2, 4, 2, 2);
  ckpt.mlr_a = 0.25;
  ckpt.mlr_b = 0.5;
  ckpt.mlr_c = -1.0;
  const auto path = dir.path() / "m.lvqm";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.fusion == "mlr");
  CHECK(loaded.temporal.fusion_w == ckpt.temporal.fusion_w);
  CHECK(loaded.mlr_a == 0.25);
  CHECK(loaded.mlr_b == 0.5);
  CHECK(loaded.mlr_c == -1.0);
}

TEST_CASE("checkpoint compatibility and corruption errors") {
  helpers::TempDir dir("ckpt-err");
  Checkpoint ckpt;
  ckpt.provenance = "semantic=builtin-semantic:seed=1:dim=48";
  ckpt.head = small_params(3, 4, 2, 1);
  const auto path = dir.path() / "m.lvqm";
  save_checkpoint(path, ckpt);

  SUBCASE("provenance mismatch") {
    const Checkpoint loaded = load_checkpoint(path);
    try {
      check_checkpoint_compatibility(loaded, "semantic=builtin-semantic:seed=2:dim=48");
      FAIL("expected compatibility error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCompatibility);
    }
  }
  SUBCASE("truncated file") {
    const std::string bytes = helpers::read_file(path);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    try {
      load_checkpoint(path);
      FAIL("expected truncation error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTruncated);
    }
  }
  SUBCASE("bad magic") {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), Error);
  }
}

TEST_SUITE_END();
