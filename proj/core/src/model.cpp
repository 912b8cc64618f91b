#include "lvqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// y = max(0, W x + b), W row-major [rows][cols].
void dense_relu(const std::vector<double>& w, const std::vector<double>& b,
                const std::vector<double>& x, std::vector<double>& y) {
  const size_t rows = b.size();
  const size_t cols = x.size();
  y.resize(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = b[r];
    for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc > 0.0 ? acc : 0.0;
  }
}

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw Error(ErrorCode::kTruncated, std::string("truncated ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_doubles(std::ostream& out, const double* data, size_t n) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 8));
}

void read_doubles(std::istream& in, double* data, size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 8));
  if (static_cast<size_t>(in.gcount()) != n * 8) {
    throw Error(ErrorCode::kTruncated, std::string("truncated ") + what);
  }
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
  const uint32_t n = read_u32(in, what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (static_cast<size_t>(in.gcount()) != n) {
    throw Error(ErrorCode::kTruncated, std::string("truncated ") + what);
  }
  return s;
}

constexpr uint32_t kLvqmVersion = 1;

void write_head(std::ostream& out, const ModelParams& p) {
  write_u32(out, p.input_dim);
  write_u32(out, p.fusion_dim);
  write_u32(out, p.hidden_dim);
  write_u32(out, p.input_shift.empty() ? 0 : 1);
  if (!p.input_shift.empty()) {
    write_doubles(out, p.input_shift.data(), p.input_shift.size());
    write_doubles(out, p.input_scale.data(), p.input_scale.size());
  }
  write_doubles(out, p.fusion_w.data(), p.fusion_w.size());
  write_doubles(out, p.fusion_b.data(), p.fusion_b.size());
  write_doubles(out, p.reg1_w.data(), p.reg1_w.size());
  write_doubles(out, p.reg1_b.data(), p.reg1_b.size());
  write_doubles(out, p.reg2_w.data(), p.reg2_w.size());
  write_doubles(out, &p.reg2_b, 1);
}

ModelParams read_head(std::istream& in) {
  ModelParams p;
  p.input_dim = read_u32(in, "LVQM head dims");
  p.fusion_dim = read_u32(in, "LVQM head dims");
  p.hidden_dim = read_u32(in, "LVQM head dims");
  const uint32_t has_norm = read_u32(in, "LVQM normalization flag");
  if (has_norm != 0) {
    p.input_shift.resize(p.input_dim);
    p.input_scale.resize(p.input_dim);
    read_doubles(in, p.input_shift.data(), p.input_shift.size(), "LVQM input shift");
    read_doubles(in, p.input_scale.data(), p.input_scale.size(), "LVQM input scale");
  }
  p.fusion_w.resize(static_cast<size_t>(p.fusion_dim) * p.input_dim);
  p.fusion_b.resize(p.fusion_dim);
  p.reg1_w.resize(static_cast<size_t>(p.hidden_dim) * p.fusion_dim);
  p.reg1_b.resize(p.hidden_dim);
  p.reg2_w.resize(p.hidden_dim);
  read_doubles(in, p.fusion_w.data(), p.fusion_w.size(), "LVQM fusion weights");
  read_doubles(in, p.fusion_b.data(), p.fusion_b.size(), "LVQM fusion bias");
  read_doubles(in, p.reg1_w.data(), p.reg1_w.size(), "LVQM reg1 weights");
  read_doubles(in, p.reg1_b.data(), p.reg1_b.size(), "LVQM reg1 bias");
  read_doubles(in, p.reg2_w.data(), p.reg2_w.size(), "LVQM reg2 weights");
  read_doubles(in, &p.reg2_b, 1, "LVQM reg2 bias");
  return p;
}

}  // namespace

size_t ModelParams::parameter_count() const {
  return fusion_w.size() + fusion_b.size() + reg1_w.size() + reg1_b.size() + reg2_w.size() + 1;
}

void ModelParams::check_shapes() const {
  require(fusion_w.size() == static_cast<size_t>(fusion_dim) * input_dim &&
              fusion_b.size() == fusion_dim &&
              reg1_w.size() == static_cast<size_t>(hidden_dim) * fusion_dim &&
              reg1_b.size() == hidden_dim && reg2_w.size() == hidden_dim,
          ErrorCode::kShapeMismatch, "model parameter buffers disagree with declared dims");
  require((input_shift.empty() && input_scale.empty()) ||
              (input_shift.size() == input_dim && input_scale.size() == input_dim),
          ErrorCode::kShapeMismatch, "input normalization vectors disagree with input dim");
}

std::vector<double> ModelParams::normalize_input(const std::vector<double>& x) const {
  if (input_shift.empty()) return x;
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - input_shift[i]) / input_scale[i];
  return out;
}

ModelParams init_params(uint32_t input_dim, uint32_t fusion_dim, uint32_t hidden_dim,
                        uint64_t seed) {
  require(input_dim >= 1, ErrorCode::kConfig, "head needs a nonempty input");
  ModelParams p;
  p.input_dim = input_dim;
  p.fusion_dim = fusion_dim;
  p.hidden_dim = hidden_dim;
  Rng rng(Rng::derive(seed, 0x4EAD));
  auto fill = [&rng](std::vector<double>& w, size_t n, uint32_t fan_in) {
    const double a = std::sqrt(1.0 / fan_in);
    w.resize(n);
    for (double& v : w) v = rng.uniform(-a, a);
  };
  fill(p.fusion_w, static_cast<size_t>(fusion_dim) * input_dim, input_dim);
  p.fusion_b.assign(fusion_dim, 0.0);
  fill(p.reg1_w, static_cast<size_t>(hidden_dim) * fusion_dim, fusion_dim);
  p.reg1_b.assign(hidden_dim, 0.0);
  fill(p.reg2_w, hidden_dim, hidden_dim);
  p.reg2_b = 0.0;
  return p;
}

std::vector<double> fuse(const std::vector<double>& si, const std::vector<double>& ti,
                         const ModelParams& params) {
  params.check_shapes();
  const size_t got = si.size() + ti.size();
  require(got == params.input_dim, ErrorCode::kShapeMismatch,
          "fusion input dim mismatch: expected " + std::to_string(params.input_dim) + ", got " +
              std::to_string(got));
  const std::vector<double> x = params.normalize_input(concat(si, ti));
  std::vector<double> ff;
  dense_relu(params.fusion_w, params.fusion_b, x, ff);
  return ff;
}

double regress_clip(const std::vector<double>& ff, const ModelParams& params) {
  params.check_shapes();
  require(ff.size() == params.fusion_dim, ErrorCode::kShapeMismatch,
          "regression input dim mismatch: expected " + std::to_string(params.fusion_dim) +
              ", got " + std::to_string(ff.size()));
  std::vector<double> hidden;
  dense_relu(params.reg1_w, params.reg1_b, ff, hidden);
  double q = params.reg2_b;
  for (size_t i = 0; i < hidden.size(); ++i) q += params.reg2_w[i] * hidden[i];
  return q;
}

double score_video(const std::vector<double>& per_clip_scores) {
  require(!per_clip_scores.empty(), ErrorCode::kShapeMismatch,
          "video score requires at least one clip score");
  double sum = 0.0;
  for (double q : per_clip_scores) sum += q;
  return sum / static_cast<double>(per_clip_scores.size());
}

Gradients::Gradients(const ModelParams& params)
    : fusion_w(params.fusion_w.size(), 0.0),
      fusion_b(params.fusion_b.size(), 0.0),
      reg1_w(params.reg1_w.size(), 0.0),
      reg1_b(params.reg1_b.size(), 0.0),
      reg2_w(params.reg2_w.size(), 0.0) {}

void Gradients::scale(double factor) {
  for (double& v : fusion_w) v *= factor;
  for (double& v : fusion_b) v *= factor;
  for (double& v : reg1_w) v *= factor;
  for (double& v : reg1_b) v *= factor;
  for (double& v : reg2_w) v *= factor;
  reg2_b *= factor;
}

double BatchTape::forward(const ModelParams& params, const std::vector<double>& si,
                          const std::vector<double>& ti) {
  ClipRecord rec;
  rec.input = concat(si, ti);
  require(rec.input.size() == params.input_dim, ErrorCode::kShapeMismatch,
          "fusion input dim mismatch: expected " + std::to_string(params.input_dim) + ", got " +
              std::to_string(rec.input.size()));
  rec.input = params.normalize_input(rec.input);  // gradients flow w.r.t. the normalized input
  dense_relu(params.fusion_w, params.fusion_b, rec.input, rec.ff);
  dense_relu(params.reg1_w, params.reg1_b, rec.ff, rec.hidden);
  double q = params.reg2_b;
  for (size_t i = 0; i < rec.hidden.size(); ++i) q += params.reg2_w[i] * rec.hidden[i];
  records_.push_back(std::move(rec));
  return q;
}

Gradients BatchTape::backward(const ModelParams& params,
                              const std::vector<double>& dloss_dq) const {
  require(!records_.empty(), ErrorCode::kState, "backward called before any forward pass");
  require(dloss_dq.size() == records_.size(), ErrorCode::kState,
          "backward expects one upstream gradient per recorded clip: recorded " +
              std::to_string(records_.size()) + ", got " + std::to_string(dloss_dq.size()));

  Gradients g(params);
  std::vector<double> d_hidden(params.hidden_dim);
  std::vector<double> d_ff(params.fusion_dim);

  for (size_t r = 0; r < records_.size(); ++r) {
    const ClipRecord& rec = records_[r];
    const double gq = dloss_dq[r];
    if (gq == 0.0) continue;

    g.reg2_b += gq;
    for (uint32_t i = 0; i < params.hidden_dim; ++i) {
      g.reg2_w[i] += gq * rec.hidden[i];
      // post-ReLU activation > 0 iff pre-activation > 0; subgradient at 0 is 0
      d_hidden[i] = rec.hidden[i] > 0.0 ? gq * params.reg2_w[i] : 0.0;
    }

    std::fill(d_ff.begin(), d_ff.end(), 0.0);
    for (uint32_t i = 0; i < params.hidden_dim; ++i) {
      const double dh = d_hidden[i];
      if (dh == 0.0) continue;
      g.reg1_b[i] += dh;
      double* gw = g.reg1_w.data() + static_cast<size_t>(i) * params.fusion_dim;
      const double* w = params.reg1_w.data() + static_cast<size_t>(i) * params.fusion_dim;
      for (uint32_t j = 0; j < params.fusion_dim; ++j) {
        gw[j] += dh * rec.ff[j];
        d_ff[j] += dh * w[j];
      }
    }

    for (uint32_t j = 0; j < params.fusion_dim; ++j) {
      const double da = rec.ff[j] > 0.0 ? d_ff[j] : 0.0;
      if (da == 0.0) continue;
      g.fusion_b[j] += da;
      double* gw = g.fusion_w.data() + static_cast<size_t>(j) * params.input_dim;
      for (uint32_t c = 0; c < params.input_dim; ++c) gw[c] += da * rec.input[c];
    }
  }
  return g;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write("LVQM", 4);
  write_u32(out, kLvqmVersion);
  write_string(out, ckpt.fusion);
  write_string(out, ckpt.provenance);
  write_string(out, ckpt.config_hash);
  write_head(out, ckpt.head);
  if (ckpt.fusion == "mlr") {
    write_head(out, ckpt.temporal);
    const double abc[3] = {ckpt.mlr_a, ckpt.mlr_b, ckpt.mlr_c};
    write_doubles(out, abc, 3);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "LVQM", 4) != 0) {
    throw Error(ErrorCode::kFormat, "bad LVQM magic: " + path.string());
  }
  const uint32_t version = read_u32(in, "LVQM version");
  if (version != kLvqmVersion) {
    throw Error(ErrorCode::kFormat, "unsupported LVQM version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.fusion = read_string(in, "LVQM fusion mode");
  if (ckpt.fusion != "mlp" && ckpt.fusion != "mlr") {
    throw Error(ErrorCode::kFormat, "unknown LVQM fusion mode: " + ckpt.fusion);
  }
  ckpt.provenance = read_string(in, "LVQM provenance");
  ckpt.config_hash = read_string(in, "LVQM config hash");
  ckpt.head = read_head(in);
  ckpt.head.check_shapes();
  if (ckpt.fusion == "mlr") {
    ckpt.temporal = read_head(in);
    ckpt.temporal.check_shapes();
    double abc[3];
    read_doubles(in, abc, 3, "LVQM mlr coefficients");
    ckpt.mlr_a = abc[0];
    ckpt.mlr_b = abc[1];
    ckpt.mlr_c = abc[2];
  }
  return ckpt;
}

void check_checkpoint_compatibility(const Checkpoint& ckpt,
                                    const std::string& expected_provenance) {
  if (ckpt.provenance != expected_provenance) {
    throw Error(ErrorCode::kCompatibility,
                "checkpoint provenance mismatch:\n  checkpoint: " + ckpt.provenance +
                    "\n  expected:   " + expected_provenance);
  }
}

}  // namespace lvqa
