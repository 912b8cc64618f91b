#pragma once

#include <array>
#include <vector>

#include "lvqa/frame.hpp"

namespace lvqa {

// All statistics in this module are population statistics (divide by n).
// The feature layouts below are frozen contracts: trained checkpoints
// depend on both the dimensions and the entry order.

// 18 entries: 16-bin normalized luminance histogram (bin width 16 over
// [0,256)), mean luminance, luminance standard deviation.
struct BrightnessFeatures {
  static constexpr int kDim = 18;
  std::array<double, 16> histogram{};
  double mean = 0.0;
  double stddev = 0.0;

  std::vector<double> to_vector() const;
};

// 6 entries: global noise estimate; mean, std, min, max of the per-cell
// estimates over a 4x4 grid; fraction of cells above the global estimate.
struct NoiseFeatures {
  static constexpr int kDim = 6;
  double global = 0.0;
  double cell_mean = 0.0;
  double cell_std = 0.0;
  double cell_min = 0.0;
  double cell_max = 0.0;
  double above_fraction = 0.0;

  std::vector<double> to_vector() const;
};

// 5 entries over the clip's per-frame mean-luminance sequence b_0..b_{L-1}:
// std(b); mean |b_{t+1}-b_t|; max |b_{t+1}-b_t|; max(b)-min(b); least-squares
// slope of b against t. All zero when L = 1.
struct ConsistencyFeatures {
  static constexpr int kDim = 5;
  double stddev = 0.0;
  double mean_abs_diff = 0.0;
  double max_abs_diff = 0.0;
  double range = 0.0;
  double slope = 0.0;

  std::vector<double> to_vector() const;
};

struct VideoAttributes {
  double brightness = 0.0;    // mean gray level, [0,255]
  double contrast = 0.0;      // gray-level standard deviation
  double colorfulness = 0.0;  // Hasler-Suesstrunk metric
};

BrightnessFeatures brightness_features(const Frame& frame);

// Immerkaer fast noise estimate: sigma = sqrt(pi/2) * (1/(6(W-2)(H-2)))
// * sum |I * M| with M = [1,-2,1; -2,4,-2; 1,-2,1] over the luminance
// plane's interior. Cells smaller than 3x3 (no interior) contribute 0.
NoiseFeatures noise_features(const Frame& frame);

ConsistencyFeatures brightness_consistency(const Video& clip);

// Per-frame attribute values on frames 0, stride, 2*stride, ..., averaged.
// Colorfulness per frame: rg = R-G, yb = (R+G)/2 - B,
// C = sqrt(var(rg)+var(yb)) + 0.3*sqrt(mean(rg)^2+mean(yb)^2).
VideoAttributes video_attributes(const Video& video, int stride);

// Default stride used when none is configured.
int default_attribute_stride(size_t frame_count);

}  // namespace lvqa
