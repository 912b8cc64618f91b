#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "lvqa/commands.hpp"
#include "lvqa/manifest.hpp"
#include "lvqa/media_io.hpp"
#include "lvqa/metrics.hpp"

using namespace lvqa;

namespace {

CorpusOptions tiny_corpus(const std::filesystem::path& out_dir, uint64_t seed = 5) {
  CorpusOptions options;
  options.out_dir = out_dir;
  options.spec.n_sources = 5;
  options.spec.frames_per_video = 16;
  options.spec.width = 32;
  options.spec.height = 32;
  options.spec.seed = seed;
  options.n_variants = 3;
  return options;
}

RunConfig tiny_config(const std::filesystem::path& cache) {
  RunConfig config;
  config.k = 3;
  config.clip_edge = 16;
  config.cache_dir = cache;
  config.epochs = 8;
  config.batch_size = 4;
  config.jobs = 2;
  return config;
}

}  // namespace

TEST_SUITE_BEGIN("commands");

TEST_CASE("corpus writes n_sources*(1+variants) rows and refuses overwrites") {
  helpers::TempDir dir("cmd-corpus");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  CHECK(cmd_corpus(tiny_corpus(out_dir), log) == kExitOk);

  const auto entries = read_manifest(out_dir / "manifest.csv");
  CHECK(entries.size() == 20);  // 5 originals + 15 enhanced
  for (const auto& e : entries) {
    CHECK(e.split == "auto");
    CHECK(std::filesystem::exists(resolve_video_path(out_dir / "manifest.csv", e)));
  }

  // second run without force refuses
  try {
    cmd_corpus(tiny_corpus(out_dir), log);
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("corpus reruns with the same seed are byte-identical") {
  helpers::TempDir dir("cmd-corpus-det");
  std::ostringstream log;
  cmd_corpus(tiny_corpus(dir.path() / "a"), log);
  cmd_corpus(tiny_corpus(dir.path() / "b"), log);
  CHECK(helpers::read_file(dir.path() / "a" / "manifest.csv") ==
        helpers::read_file(dir.path() / "b" / "manifest.csv"));
  // spot-check one video byte-for-byte
  CHECK(helpers::read_file(dir.path() / "a" / "videos" / "src002_v1_gamma.rgbv") ==
        helpers::read_file(dir.path() / "b" / "videos" / "src002_v1_gamma.rgbv"));
}

TEST_CASE("extract: partial failure leaves the rest of the cache valid") {
  helpers::TempDir dir("cmd-extract");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  CorpusOptions corpus = tiny_corpus(out_dir);
  corpus.spec.n_sources = 3;
  corpus.n_variants = 0;
  cmd_corpus(corpus, log);

  // append a manifest row pointing at a missing file
  {
    std::ofstream append(out_dir / "manifest.csv", std::ios::app);
    append << "videos/missing.rgbv,srcX,50.0,auto\n";
  }

  ExtractOptions options{out_dir / "manifest.csv", tiny_config(dir.path() / "cache")};
  std::ostringstream out1;
  CHECK(cmd_extract(options, out1) == kExitPartial);
  CHECK(out1.str().find("missing.rgbv") != std::string::npos);

  // rerun: the three good videos are cache hits
  std::ostringstream out2;
  CHECK(cmd_extract(options, out2) == kExitPartial);
  CHECK(out2.str().find("3 cache hits") != std::string::npos);
}

TEST_CASE("train/predict/eval round trip on a tiny corpus") {
  helpers::TempDir dir("cmd-roundtrip");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  cmd_corpus(tiny_corpus(out_dir), log);

  RunConfig config = tiny_config(dir.path() / "cache");
  const auto manifest = out_dir / "manifest.csv";
  const auto ckpt_path = dir.path() / "model.lvqm";

  TrainOptions train{manifest, config, ckpt_path, dir.path() / "log.jsonl"};
  CHECK(cmd_train(train, log) == kExitOk);
  CHECK(std::filesystem::exists(ckpt_path));

  // JSONL log has one record per epoch with the documented fields
  {
    std::ifstream in(dir.path() / "log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
      CHECK(line.find("\"epoch\"") != std::string::npos);
      CHECK(line.find("\"train_loss\"") != std::string::npos);
      CHECK(line.find("\"train_mae\"") != std::string::npos);
      CHECK(line.find("\"train_rank\"") != std::string::npos);
      CHECK(line.find("\"val_srcc\"") != std::string::npos);
      ++lines;
    }
    CHECK(lines == config.epochs);
  }

  PredictOptions predict{manifest, ckpt_path, config, dir.path() / "pred.csv"};
  CHECK(cmd_predict(predict, log) == kExitOk);
  const auto rows = read_predictions_csv(dir.path() / "pred.csv");
  CHECK(rows.size() == 20);
  for (const auto& row : rows) CHECK(row.per_clip.size() == 3);

  // same inputs -> identical bytes
  PredictOptions predict2 = predict;
  predict2.out_csv = dir.path() / "pred2.csv";
  CHECK(cmd_predict(predict2, log) == kExitOk);
  CHECK(helpers::read_file(dir.path() / "pred.csv") == helpers::read_file(dir.path() / "pred2.csv"));

  EvalOptions eval{dir.path() / "pred.csv", manifest, dir.path() / "metrics.json",
                   dir.path() / "scatter.csv", ""};
  CHECK(cmd_eval(eval, log) == kExitOk);
  const std::string metrics = helpers::read_file(dir.path() / "metrics.json");
  CHECK(metrics.find("\"srcc\"") != std::string::npos);
  CHECK(metrics.find("\"config_hash\"") != std::string::npos);
  const std::string scatter = helpers::read_file(dir.path() / "scatter.csv");
  CHECK(scatter.find("pred,mos,fitted_pred") != std::string::npos);
}

TEST_CASE("predict refuses a checkpoint trained under another provider seed") {
  helpers::TempDir dir("cmd-mismatch");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  CorpusOptions corpus = tiny_corpus(out_dir);
  corpus.spec.n_sources = 3;
  corpus.n_variants = 1;
  cmd_corpus(corpus, log);

  RunConfig config = tiny_config(dir.path() / "cache");
  config.epochs = 2;
  TrainOptions train{out_dir / "manifest.csv", config, dir.path() / "m.lvqm", ""};
  cmd_train(train, log);

  RunConfig other = config;
  other.semantic.seed = config.semantic.seed + 1;
  PredictOptions predict{out_dir / "manifest.csv", dir.path() / "m.lvqm", other,
                         dir.path() / "pred.csv"};
  try {
    cmd_predict(predict, log);
    FAIL("expected compatibility error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCompatibility);
  }
}

TEST_CASE("ablated training narrows the head input") {
  helpers::TempDir dir("cmd-ablate");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  CorpusOptions corpus = tiny_corpus(out_dir);
  corpus.spec.n_sources = 3;
  corpus.n_variants = 1;
  cmd_corpus(corpus, log);

  RunConfig config = tiny_config(dir.path() / "cache");
  config.epochs = 1;
  config.ablation = "no-handcrafted";
  TrainOptions train{out_dir / "manifest.csv", config, dir.path() / "m.lvqm", ""};
  CHECK(cmd_train(train, log) == kExitOk);
  const Checkpoint ckpt = load_checkpoint(dir.path() / "m.lvqm");
  CHECK(ckpt.head.input_dim == 48 + 16);  // SF and MF only
  CHECK(ckpt.provenance.find("ablation=no-handcrafted") != std::string::npos);
}

TEST_CASE("mlr fusion trains two heads and a linear combination") {
  helpers::TempDir dir("cmd-mlr");
  const auto out_dir = dir.path() / "corpus";
  std::ostringstream log;
  CorpusOptions corpus = tiny_corpus(out_dir);
  corpus.spec.n_sources = 4;
  corpus.n_variants = 1;
  cmd_corpus(corpus, log);

  RunConfig config = tiny_config(dir.path() / "cache");
  config.epochs = 3;
  config.fusion = "mlr";
  TrainOptions train{out_dir / "manifest.csv", config, dir.path() / "m.lvqm", ""};
  CHECK(cmd_train(train, log) == kExitOk);

  const Checkpoint ckpt = load_checkpoint(dir.path() / "m.lvqm");
  CHECK(ckpt.fusion == "mlr");
  CHECK(ckpt.head.input_dim == 72);      // spatial head: SI only
  CHECK(ckpt.temporal.input_dim == 21);  // temporal head: TI only

  PredictOptions predict{out_dir / "manifest.csv", dir.path() / "m.lvqm", config,
                         dir.path() / "pred.csv"};
  CHECK(cmd_predict(predict, log) == kExitOk);
  // Q is the mean of combined per-clip scores
  for (const auto& row : read_predictions_csv(dir.path() / "pred.csv")) {
    CHECK(row.q == doctest::Approx(score_video(row.per_clip)).epsilon(1e-6));
  }
}

TEST_CASE("eval: perfect and reversed predictors") {
  helpers::TempDir dir("cmd-eval");
  // hand-written manifest + rgbv-free predictions (eval never opens videos)
  const auto manifest_path = dir.path() / "manifest.csv";
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 6; ++i) {
    ManifestEntry e;
    e.video_path = "videos/v" + std::to_string(i) + ".rgbv";
    e.source_id = "s" + std::to_string(i);
    e.mos = 10.0 + 15.0 * i;
    entries.push_back(e);
  }
  write_manifest(manifest_path, entries);

  auto write_predictions = [&](const std::filesystem::path& p, bool reversed) {
    std::ofstream out(p);
    out << "video,Q,Q_1\n";
    for (const auto& e : entries) {
      const double q = reversed ? 100.0 - e.mos : e.mos;
      out << e.video_path << "," << q << "," << q << "\n";
    }
  };

  std::ostringstream log;
  write_predictions(dir.path() / "perfect.csv", false);
  EvalOptions eval{dir.path() / "perfect.csv", manifest_path, dir.path() / "m.json",
                   dir.path() / "s.csv", ""};
  CHECK(cmd_eval(eval, log) == kExitOk);
  CHECK(log.str().find("srcc=1") != std::string::npos);
  CHECK(log.str().find("rmse=0") != std::string::npos);

  write_predictions(dir.path() / "reversed.csv", true);
  EvalOptions eval2{dir.path() / "reversed.csv", manifest_path, dir.path() / "m2.json",
                    "", ""};
  std::ostringstream log2;
  CHECK(cmd_eval(eval2, log2) == kExitOk);
  CHECK(log2.str().find("srcc=-1") != std::string::npos);
}

TEST_CASE("eval: unmatched prediction rows are listed and fatal") {
  helpers::TempDir dir("cmd-eval-unmatched");
  const auto manifest_path = dir.path() / "manifest.csv";
  std::vector<ManifestEntry> entries;
  ManifestEntry e;
  e.video_path = "a.rgbv";
  e.source_id = "a";
  e.mos = 50;
  entries.push_back(e);
  e.video_path = "b.rgbv";
  e.source_id = "b";
  e.mos = 60;
  entries.push_back(e);
  e.video_path = "c.rgbv";
  e.source_id = "c";
  e.mos = 70;
  entries.push_back(e);
  write_manifest(manifest_path, entries);
  {
    std::ofstream out(dir.path() / "pred.csv");
    out << "video,Q\n";
    out << "a.rgbv,10\nb.rgbv,20\nGHOST.rgbv,30\n";
  }
  EvalOptions eval{dir.path() / "pred.csv", manifest_path, dir.path() / "m.json", "", ""};
  std::ostringstream log;
  try {
    cmd_eval(eval, log);
    FAIL("expected unmatched-row error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("GHOST.rgbv") != std::string::npos);
  }
}

TEST_CASE("attrs: achromatic corpus, normalization, enhancement ordering") {
  helpers::TempDir dir("cmd-attrs");
  // three gray videos at different levels plus one gamma-brightened variant
  const auto manifest_path = dir.path() / "manifest.csv";
  std::vector<ManifestEntry> entries;
  const std::vector<uint8_t> levels = {30, 90, 150};
  for (size_t i = 0; i < levels.size(); ++i) {
    const auto rel = "v" + std::to_string(i) + ".rgbv";
    save_rgbv(dir.path() / rel, helpers::gray_video({levels[i], levels[i], levels[i]}));
    ManifestEntry e;
    e.video_path = rel;
    e.source_id = "s" + std::to_string(i);
    e.mos = 50;
    entries.push_back(e);
  }
  const Video dark = helpers::gray_video({40, 40, 40});
  save_rgbv(dir.path() / "dark.rgbv", dark);
  save_rgbv(dir.path() / "bright.rgbv", enhance_gamma(dark, 2.0));
  ManifestEntry e;
  e.video_path = "dark.rgbv";
  e.source_id = "d";
  e.mos = 40;
  entries.push_back(e);
  e.video_path = "bright.rgbv";
  e.source_id = "d";
  e.mos = 60;
  entries.push_back(e);
  write_manifest(manifest_path, entries);

  std::ostringstream log;
  AttrsOptions options{manifest_path, dir.path() / "attrs.csv", false};
  CHECK(cmd_attrs(options, log) == kExitOk);

  // colorfulness of achromatic videos is 0; gamma variant is brighter
  std::ifstream in(dir.path() / "attrs.csv");
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::vector<double>> by_video;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string video, field;
    std::getline(ss, video, ',');
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    by_video[video] = vals;
  }
  for (const auto& [video, vals] : by_video) CHECK(vals[2] == 0.0);
  CHECK(by_video["bright.rgbv"][0] > by_video["dark.rgbv"][0]);

  // normalized: columns within [0,1], brightness hits both 0 and 1
  AttrsOptions norm{manifest_path, dir.path() / "attrs_norm.csv", true};
  CHECK(cmd_attrs(norm, log) == kExitOk);
  std::ifstream in2(dir.path() / "attrs_norm.csv");
  std::getline(in2, line);
  double min_b = 1e9, max_b = -1e9;
  while (std::getline(in2, line)) {
    std::istringstream ss(line);
    std::string video, field;
    std::getline(ss, video, ',');
    std::getline(ss, field, ',');
    const double b = std::stod(field);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    min_b = std::min(min_b, b);
    max_b = std::max(max_b, b);
  }
  CHECK(min_b == 0.0);
  CHECK(max_b == 1.0);
}

TEST_SUITE_END();
