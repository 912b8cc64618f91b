#include "lvqa/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lvqa/error.hpp"
#include "lvqa/media_io.hpp"
#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

constexpr int kInputEdge = 64;
constexpr uint32_t kLvqfVersion = 1;

void fill_uniform(std::vector<double>& w, size_t count, int fan_in, Rng& rng) {
  const double a = std::sqrt(1.0 / fan_in);
  w.resize(count);
  for (double& v : w) v = rng.uniform(-a, a);
}

// 2D tensor [channels][h][w], channel-major.
struct Tensor2d {
  int channels = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor2d(int c, int hh, int ww) : channels(c), h(hh), w(ww), data(static_cast<size_t>(c) * hh * ww, 0.0) {}
  double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
};

// Valid 3x3 stride-2 convolution + ReLU. Accumulation order is fixed:
// kernel rows, kernel cols, then input channel innermost.
Tensor2d conv3x3s2_relu(const Tensor2d& in, const std::vector<double>& w, int out_ch) {
  const int oh = (in.h - 3) / 2 + 1;
  const int ow = (in.w - 3) / 2 + 1;
  Tensor2d out(out_ch, oh, ow);
  const size_t per_out = static_cast<size_t>(in.channels) * 9;
  for (int oc = 0; oc < out_ch; ++oc) {
    const double* wk = w.data() + per_out * oc;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            for (int ic = 0; ic < in.channels; ++ic) {
              acc += wk[(static_cast<size_t>(ic) * 3 + ky) * 3 + kx] *
                     in.at(ic, oy * 2 + ky, ox * 2 + kx);
            }
          }
        }
        out.at(oc, oy, ox) = std::max(0.0, acc);
      }
    }
  }
  return out;
}

std::vector<double> gap2d(const Tensor2d& t) {
  std::vector<double> out(t.channels);
  const double norm = 1.0 / (static_cast<double>(t.h) * t.w);
  for (int c = 0; c < t.channels; ++c) {
    double acc = 0.0;
    for (int y = 0; y < t.h; ++y) {
      for (int x = 0; x < t.w; ++x) acc += t.at(c, y, x);
    }
    out[c] = acc * norm;
  }
  return out;
}

// 3D tensor [channels][t][h][w].
struct Tensor3d {
  int channels = 0, t = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor3d(int c, int tt, int hh, int ww)
      : channels(c), t(tt), h(hh), w(ww), data(static_cast<size_t>(c) * tt * hh * ww, 0.0) {}
  double& at(int c, int ti, int y, int x) {
    return data[((static_cast<size_t>(c) * t + ti) * h + y) * w + x];
  }
  double at(int c, int ti, int y, int x) const {
    return data[((static_cast<size_t>(c) * t + ti) * h + y) * w + x];
  }
};

Tensor3d conv3x3x3s2_relu(const Tensor3d& in, const std::vector<double>& w, int out_ch) {
  const int ot = (in.t - 3) / 2 + 1;
  const int oh = (in.h - 3) / 2 + 1;
  const int ow = (in.w - 3) / 2 + 1;
  Tensor3d out(out_ch, ot, oh, ow);
  const size_t per_out = static_cast<size_t>(in.channels) * 27;
  for (int oc = 0; oc < out_ch; ++oc) {
    const double* wk = w.data() + per_out * oc;
    for (int oti = 0; oti < ot; ++oti) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int kt = 0; kt < 3; ++kt) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                for (int ic = 0; ic < in.channels; ++ic) {
                  acc += wk[((static_cast<size_t>(ic) * 3 + kt) * 3 + ky) * 3 + kx] *
                         in.at(ic, oti * 2 + kt, oy * 2 + ky, ox * 2 + kx);
                }
              }
            }
          }
          out.at(oc, oti, oy, ox) = std::max(0.0, acc);
        }
      }
    }
  }
  return out;
}

uint64_t hash_doubles(const std::vector<double>* arrays, size_t n) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h = fnv1a64(arrays[i].data(), arrays[i].size() * sizeof(double), h);
  }
  return h;
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

}  // namespace

void write_features(const std::filesystem::path& path,
                    const std::vector<std::vector<float>>& vectors) {
  uint32_t dim = vectors.empty() ? 0 : static_cast<uint32_t>(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::kShapeMismatch, "feature vectors must share one dimension");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write("LVQF", 4);
  write_u32(out, kLvqfVersion);
  write_u32(out, static_cast<uint32_t>(vectors.size()));
  write_u32(out, dim);
  static_assert(sizeof(float) == 4);
  for (const auto& v : vectors) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<std::vector<float>> read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "LVQF", 4) != 0) {
    throw Error(ErrorCode::kFormat, "bad LVQF magic: " + path.string());
  }
  const uint32_t version = read_u32(in, "LVQF version");
  if (version != kLvqfVersion) {
    throw Error(ErrorCode::kFormat,
                "unsupported LVQF version " + std::to_string(version) + ": " + path.string());
  }
  const uint32_t count = read_u32(in, "LVQF count");
  const uint32_t dim = read_u32(in, "LVQF dim");
  std::vector<std::vector<float>> vectors(count, std::vector<float>(dim));
  for (auto& v : vectors) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != dim * sizeof(float)) {
      throw Error(ErrorCode::kTruncated, "truncated LVQF payload: " + path.string());
    }
  }
  return vectors;
}

SemanticBackbone::SemanticBackbone(uint64_t seed) : seed_(seed) {
  Rng rng(Rng::derive(seed, 0x5EED));
  fill_uniform(weights_[0], 8u * 3 * 9, 3 * 9, rng);    // 3 -> 8
  fill_uniform(weights_[1], 16u * 8 * 9, 8 * 9, rng);   // 8 -> 16
  fill_uniform(weights_[2], 32u * 16 * 9, 16 * 9, rng); // 16 -> 32
}

std::vector<double> SemanticBackbone::features(const Frame& frame) const {
  const Frame resized = (frame.width == kInputEdge && frame.height == kInputEdge)
                            ? frame
                            : resize_bilinear(frame, kInputEdge, kInputEdge);
  Tensor2d input(3, kInputEdge, kInputEdge);
  for (int c = 0; c < 3; ++c) {
    const uint8_t* plane = resized.plane(c);
    for (int y = 0; y < kInputEdge; ++y) {
      for (int x = 0; x < kInputEdge; ++x) {
        input.at(c, y, x) = plane[static_cast<size_t>(y) * kInputEdge + x] / 255.0;
      }
    }
  }
  const Tensor2d a1 = conv3x3s2_relu(input, weights_[0], 8);
  const Tensor2d stage_a = conv3x3s2_relu(a1, weights_[1], 16);
  const Tensor2d stage_b = conv3x3s2_relu(stage_a, weights_[2], 32);

  std::vector<double> out = gap2d(stage_a);
  const std::vector<double> gb = gap2d(stage_b);
  out.insert(out.end(), gb.begin(), gb.end());
  return out;
}

uint64_t SemanticBackbone::weight_hash() const { return hash_doubles(weights_, 3); }

MotionBackbone::MotionBackbone(uint64_t seed) : seed_(seed) {
  Rng rng(Rng::derive(seed, 0x3D0F));
  fill_uniform(weights_[0], 8u * 1 * 27, 1 * 27, rng);   // 1 -> 8
  fill_uniform(weights_[1], 16u * 8 * 27, 8 * 27, rng);  // 8 -> 16
}

std::vector<double> MotionBackbone::features(const Video& clip) const {
  if (clip.frames.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "motion features require at least one frame");
  }
  const size_t l = clip.frame_count();
  Tensor3d input(1, kTimeSteps, kInputEdge, kInputEdge);
  for (int t = 0; t < kTimeSteps; ++t) {
    size_t src;
    if (l >= kTimeSteps) {
      src = static_cast<size_t>(t) * l / kTimeSteps;
    } else if (static_cast<size_t>(t) < l) {
      src = static_cast<size_t>(t);
    } else {
      continue;  // zero padding in time
    }
    const Frame& f = clip.frames[src];
    const Frame resized = (f.width == kInputEdge && f.height == kInputEdge)
                              ? f
                              : resize_bilinear(f, kInputEdge, kInputEdge);
    const std::vector<double> luma = to_grayscale(resized);
    for (int y = 0; y < kInputEdge; ++y) {
      for (int x = 0; x < kInputEdge; ++x) {
        input.at(0, t, y, x) = luma[static_cast<size_t>(y) * kInputEdge + x] / 255.0;
      }
    }
  }
  const Tensor3d c1 = conv3x3x3s2_relu(input, weights_[0], 8);
  const Tensor3d c2 = conv3x3x3s2_relu(c1, weights_[1], 16);

  std::vector<double> out(16);
  const double norm = 1.0 / (static_cast<double>(c2.t) * c2.h * c2.w);
  for (int c = 0; c < 16; ++c) {
    double acc = 0.0;
    for (int t = 0; t < c2.t; ++t) {
      for (int y = 0; y < c2.h; ++y) {
        for (int x = 0; x < c2.w; ++x) acc += c2.at(c, t, y, x);
      }
    }
    out[c] = acc * norm;
  }
  return out;
}

uint64_t MotionBackbone::weight_hash() const { return hash_doubles(weights_, 2); }

FeatureProvider FeatureProvider::builtin_semantic(uint64_t seed) {
  FeatureProvider p;
  p.kind_ = ProviderKind::kBuiltinSemantic;
  p.dim_ = SemanticBackbone::kDim;
  p.semantic_ = std::make_shared<SemanticBackbone>(seed);
  return p;
}

FeatureProvider FeatureProvider::builtin_motion(uint64_t seed) {
  FeatureProvider p;
  p.kind_ = ProviderKind::kBuiltinMotion;
  p.dim_ = MotionBackbone::kDim;
  p.motion_ = std::make_shared<MotionBackbone>(seed);
  return p;
}

FeatureProvider FeatureProvider::from_file(const std::filesystem::path& path) {
  FeatureProvider p;
  p.kind_ = ProviderKind::kFile;
  auto table = std::make_shared<std::vector<std::vector<float>>>(read_features(path));
  if (table->empty()) throw Error(ErrorCode::kFormat, "feature file is empty: " + path.string());
  p.dim_ = static_cast<int>(table->front().size());
  p.table_ = std::move(table);
  return p;
}

std::string FeatureProvider::id() const {
  switch (kind_) {
    case ProviderKind::kBuiltinSemantic:
      return "builtin-semantic:seed=" + std::to_string(semantic_->seed()) +
             ":dim=" + std::to_string(dim_);
    case ProviderKind::kBuiltinMotion:
      return "builtin-motion:seed=" + std::to_string(motion_->seed()) +
             ":dim=" + std::to_string(dim_);
    case ProviderKind::kFile:
      return "file:dim=" + std::to_string(dim_);
  }
  return "unknown";
}

std::vector<double> FeatureProvider::frame_features(const Frame& frame, size_t index) const {
  if (kind_ == ProviderKind::kBuiltinSemantic) return semantic_->features(frame);
  if (kind_ == ProviderKind::kFile) {
    if (index >= table_->size()) {
      throw Error(ErrorCode::kLookup,
                  "feature file has no entry for frame " + std::to_string(index));
    }
    const auto& row = (*table_)[index];
    return std::vector<double>(row.begin(), row.end());
  }
  throw Error(ErrorCode::kConfig, "provider cannot produce frame features");
}

std::vector<double> FeatureProvider::clip_features(const Video& clip, size_t index) const {
  if (kind_ == ProviderKind::kBuiltinMotion) return motion_->features(clip);
  if (kind_ == ProviderKind::kFile) {
    if (index >= table_->size()) {
      throw Error(ErrorCode::kLookup,
                  "feature file has no entry for clip " + std::to_string(index));
    }
    const auto& row = (*table_)[index];
    return std::vector<double>(row.begin(), row.end());
  }
  throw Error(ErrorCode::kConfig, "provider cannot produce clip features");
}

uint64_t FeatureProvider::weight_hash() const {
  switch (kind_) {
    case ProviderKind::kBuiltinSemantic: return semantic_->weight_hash();
    case ProviderKind::kBuiltinMotion: return motion_->weight_hash();
    case ProviderKind::kFile: return 0;
  }
  return 0;
}

}  // namespace lvqa
