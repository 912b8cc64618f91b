#include <iostream>

#include <CLI11.hpp>

#include "lvqa/commands.hpp"
#include "lvqa/error.hpp"

namespace {

using lvqa::RunConfig;

// Shared flags. Precedence: command line > config file > defaults. The
// config file is applied first, then every flag the user actually passed
// overrides the corresponding field.
struct CommonFlags {
  std::string config_file;
  int k = -1;
  int clip_edge = -1;
  double beta = -1.0;
  int64_t seed = -1;
  std::string ablation, fusion, cache_dir;
  int jobs = -1;
  int epochs = -1;
  double lr = -1.0;
  double weight_decay = -1.0;
  int batch_size = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file");
  cmd->add_option("--seed", flags.seed, "master seed (split, init, shuffling)");
  cmd->add_option("--k", flags.k, "number of key frames / clips");
  cmd->add_option("--clip-edge", flags.clip_edge, "clip resolution");
  cmd->add_option("--beta", flags.beta, "rank-loss weight");
  cmd->add_option("--ablate", flags.ablation, "feature ablation")
      ->check(CLI::IsMember({"full", "no-handcrafted", "no-bf-nf", "no-cf", "sf-only", "mf-only"}));
  cmd->add_option("--fusion", flags.fusion, "fusion strategy")
      ->check(CLI::IsMember({"mlp", "mlr"}));
  cmd->add_option("--cache", flags.cache_dir, "feature cache directory");
  cmd->add_option("--jobs", flags.jobs, "worker threads for extraction");
  cmd->add_option("--epochs", flags.epochs, "training epochs");
  cmd->add_option("--lr", flags.lr, "learning rate");
  cmd->add_option("--wd", flags.weight_decay, "weight decay");
  cmd->add_option("--batch", flags.batch_size, "batch size (videos)");
}

RunConfig build_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_file.empty()) config = RunConfig::from_json_file(flags.config_file);
  if (flags.seed >= 0) config.seed = static_cast<uint64_t>(flags.seed);
  if (flags.k > 0) config.k = flags.k;
  if (flags.clip_edge > 0) config.clip_edge = flags.clip_edge;
  if (flags.beta >= 0.0) config.beta = flags.beta;
  if (!flags.ablation.empty()) config.ablation = flags.ablation;
  if (!flags.fusion.empty()) config.fusion = flags.fusion;
  if (!flags.cache_dir.empty()) config.cache_dir = flags.cache_dir;
  if (flags.jobs > 0) config.jobs = flags.jobs;
  if (flags.epochs >= 0) config.epochs = flags.epochs;
  if (flags.lr >= 0.0) config.learning_rate = flags.lr;
  if (flags.weight_decay >= 0.0) config.weight_decay = flags.weight_decay;
  if (flags.batch_size > 0) config.batch_size = flags.batch_size;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"no-reference quality assessment for low-light video enhancement"};
  app.require_subcommand(1);

  // corpus
  auto* corpus = app.add_subcommand("corpus", "generate a synthetic corpus with pseudo-MOS");
  lvqa::CorpusOptions corpus_opts;
  int64_t corpus_seed = 1;
  corpus->add_option("--out", corpus_opts.out_dir, "output directory")->required();
  corpus->add_option("--sources", corpus_opts.spec.n_sources, "number of source videos");
  corpus->add_option("--variants", corpus_opts.n_variants, "enhanced versions per source");
  corpus->add_option("--frames", corpus_opts.spec.frames_per_video, "frames per video");
  corpus->add_option("--width", corpus_opts.spec.width, "frame width");
  corpus->add_option("--height", corpus_opts.spec.height, "frame height");
  corpus->add_option("--seed", corpus_seed, "corpus seed");
  corpus->add_option("--jobs", corpus_opts.jobs, "worker threads");
  corpus->add_flag("--force", corpus_opts.force, "overwrite a non-empty output directory");

  // attrs
  auto* attrs = app.add_subcommand("attrs", "report brightness/contrast/colorfulness per video");
  lvqa::AttrsOptions attrs_opts;
  attrs->add_option("--manifest", attrs_opts.manifest, "manifest CSV")->required();
  attrs->add_option("--out", attrs_opts.out_csv, "output CSV")->required();
  attrs->add_flag("--normalize", attrs_opts.normalize, "min-max normalize each column");

  // extract
  auto* extract = app.add_subcommand("extract", "compute and cache per-video features");
  CommonFlags extract_flags;
  std::string extract_manifest;
  extract->add_option("--manifest", extract_manifest, "manifest CSV")->required();
  add_common_flags(extract, extract_flags);

  // train
  auto* train = app.add_subcommand("train", "train the quality head");
  CommonFlags train_flags;
  std::string train_manifest, train_ckpt = "model.lvqm", train_log = "train_log.jsonl";
  std::string train_resolved = "resolved_manifest.csv";
  train->add_option("--manifest", train_manifest, "manifest CSV")->required();
  train->add_option("--checkpoint", train_ckpt, "output checkpoint path");
  train->add_option("--log", train_log, "output JSONL training log");
  train->add_option("--resolved-manifest", train_resolved,
                    "write the manifest with resolved split labels here");
  add_common_flags(train, train_flags);

  // predict
  auto* predict = app.add_subcommand("predict", "score videos with a trained checkpoint");
  CommonFlags predict_flags;
  std::string predict_input, predict_ckpt, predict_out = "predictions.csv";
  predict->add_option("--input", predict_input, "manifest CSV or a single video file")->required();
  predict->add_option("--checkpoint", predict_ckpt, "trained checkpoint")->required();
  predict->add_option("--out", predict_out, "output CSV");
  add_common_flags(predict, predict_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "correlate predictions against MOS");
  lvqa::EvalOptions eval_opts;
  eval_opts.metrics_out = "metrics.json";
  eval_opts.scatter_out = "scatter.csv";
  eval->add_option("--predictions", eval_opts.predictions, "predictions CSV")->required();
  eval->add_option("--manifest", eval_opts.manifest, "manifest CSV")->required();
  eval->add_option("--metrics", eval_opts.metrics_out, "output metrics JSON");
  eval->add_option("--scatter", eval_opts.scatter_out, "output scatter CSV");
  eval->add_option("--split", eval_opts.split, "restrict to one split (train|val|test)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (corpus->parsed()) {
      corpus_opts.spec.seed = static_cast<uint64_t>(corpus_seed);
      return lvqa::cmd_corpus(corpus_opts, std::cout);
    }
    if (attrs->parsed()) {
      return lvqa::cmd_attrs(attrs_opts, std::cout);
    }
    if (extract->parsed()) {
      lvqa::ExtractOptions opts{extract_manifest, build_config(extract_flags)};
      return lvqa::cmd_extract(opts, std::cout);
    }
    if (train->parsed()) {
      lvqa::TrainOptions opts{train_manifest, build_config(train_flags), train_ckpt, train_log,
                              train_resolved};
      return lvqa::cmd_train(opts, std::cout);
    }
    if (predict->parsed()) {
      lvqa::PredictOptions opts{predict_input, predict_ckpt, build_config(predict_flags),
                                predict_out};
      return lvqa::cmd_predict(opts, std::cout);
    }
    if (eval->parsed()) {
      return lvqa::cmd_eval(eval_opts, std::cout);
    }
  } catch (const lvqa::Error& e) {
    std::cerr << "error (" << lvqa::error_code_name(e.code()) << "): " << e.what() << "\n";
    return lvqa::kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lvqa::kExitFatal;
  }
  return lvqa::kExitFatal;
}
