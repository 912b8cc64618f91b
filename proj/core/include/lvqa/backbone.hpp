#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lvqa/frame.hpp"

namespace lvqa {

// LVQF feature container (bit-exact): magic "LVQF", u32 LE version = 1,
// u32 count, u32 dim, then count*dim IEEE-754 LE f32, row-major.
void write_features(const std::filesystem::path& path,
                    const std::vector<std::vector<float>>& vectors);
std::vector<std::vector<float>> read_features(const std::filesystem::path& path);

// Frame-level semantic features. The builtin backbone resizes the frame to
// 64x64, scales channels to [0,1], and runs:
//   stage A: 3x3 stride-2 conv (3->8 ch), ReLU; 3x3 stride-2 conv (8->16), ReLU
//   stage B: 3x3 stride-2 conv (16->32), ReLU
// output = GAP(stage A) concat GAP(stage B), dimension 16+32 = 48. Valid
// padding, bias 0, weights drawn once from seeded uniform(-a,a) with
// a = sqrt(1/fan_in). Weights are frozen after construction.
class SemanticBackbone {
 public:
  static constexpr int kDim = 48;

  explicit SemanticBackbone(uint64_t seed);

  std::vector<double> features(const Frame& frame) const;
  uint64_t seed() const { return seed_; }
  uint64_t weight_hash() const;

  // Weight accessors for the independent convolution oracle in tests.
  const std::vector<double>& conv_weights(int layer) const { return weights_[layer]; }

 private:
  uint64_t seed_;
  std::vector<double> weights_[3];  // [out][in][ky][kx] flattened per layer
};

// Clip-level motion features. The builtin backbone subsamples or zero-pads
// the clip in time to 8 luminance frames at 64x64 scaled to [0,1], then runs
// two 3x3x3 stride-2 (all dims) 3D convolutions (1->8, 8->16 channels) with
// ReLU, and global-average-pools everything to dimension 16.
class MotionBackbone {
 public:
  static constexpr int kDim = 16;
  static constexpr int kTimeSteps = 8;

  explicit MotionBackbone(uint64_t seed);

  std::vector<double> features(const Video& clip) const;
  uint64_t seed() const { return seed_; }
  uint64_t weight_hash() const;

  const std::vector<double>& conv_weights(int layer) const { return weights_[layer]; }

 private:
  uint64_t seed_;
  std::vector<double> weights_[2];  // [out][in][kt][ky][kx] flattened per layer
};

enum class ProviderKind { kBuiltinSemantic, kBuiltinMotion, kFile };

// Uniform front end over the builtin backbones and LVQF files. File-backed
// providers look features up by frame/clip index and ignore pixel content.
class FeatureProvider {
 public:
  static FeatureProvider builtin_semantic(uint64_t seed);
  static FeatureProvider builtin_motion(uint64_t seed);
  static FeatureProvider from_file(const std::filesystem::path& path);

  ProviderKind kind() const { return kind_; }
  int dim() const { return dim_; }

  // Stable identifier recorded in checkpoints for compatibility checks.
  std::string id() const;

  std::vector<double> frame_features(const Frame& frame, size_t index) const;
  std::vector<double> clip_features(const Video& clip, size_t index) const;

  uint64_t weight_hash() const;

 private:
  FeatureProvider() = default;

  ProviderKind kind_ = ProviderKind::kBuiltinSemantic;
  int dim_ = 0;
  std::shared_ptr<const SemanticBackbone> semantic_;
  std::shared_ptr<const MotionBackbone> motion_;
  std::shared_ptr<const std::vector<std::vector<float>>> table_;
};

}  // namespace lvqa
