#include "lvqa/handcrafted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lvqa/error.hpp"
#include "lvqa/media_io.hpp"

namespace lvqa {
namespace {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd ms;
  if (values.empty()) return ms;
  double sum = 0.0;
  for (double v : values) sum += v;
  ms.mean = sum / values.size();
  double ss = 0.0;
  for (double v : values) {
    const double d = v - ms.mean;
    ss += d * d;
  }
  ms.stddev = std::sqrt(ss / values.size());
  return ms;
}

// Immerkaer estimate over a rectangular window of the luminance plane.
// Returns 0 when the window has no interior.
double immerkaer_window(const std::vector<double>& luma, int width, int x0, int y0, int w, int h) {
  if (w < 3 || h < 3) return 0.0;
  double acc = 0.0;
  for (int y = y0 + 1; y < y0 + h - 1; ++y) {
    for (int x = x0 + 1; x < x0 + w - 1; ++x) {
      const auto at = [&](int xx, int yy) { return luma[static_cast<size_t>(yy) * width + xx]; };
      const double response = at(x - 1, y - 1) - 2.0 * at(x, y - 1) + at(x + 1, y - 1) -
                              2.0 * at(x - 1, y) + 4.0 * at(x, y) - 2.0 * at(x + 1, y) +
                              at(x - 1, y + 1) - 2.0 * at(x, y + 1) + at(x + 1, y + 1);
      acc += std::abs(response);
    }
  }
  const double norm = std::sqrt(3.14159265358979323846 / 2.0) /
                      (6.0 * static_cast<double>(w - 2) * (h - 2));
  return norm * acc;
}

}  // namespace

std::vector<double> BrightnessFeatures::to_vector() const {
  std::vector<double> v(histogram.begin(), histogram.end());
  v.push_back(mean);
  v.push_back(stddev);
  return v;
}

std::vector<double> NoiseFeatures::to_vector() const {
  return {global, cell_mean, cell_std, cell_min, cell_max, above_fraction};
}

std::vector<double> ConsistencyFeatures::to_vector() const {
  return {stddev, mean_abs_diff, max_abs_diff, range, slope};
}

BrightnessFeatures brightness_features(const Frame& frame) {
  const std::vector<double> luma = to_grayscale(frame);
  BrightnessFeatures bf;
  for (double y : luma) {
    const int bin = std::min(15, static_cast<int>(y / 16.0));
    bf.histogram[bin] += 1.0;
  }
  for (double& b : bf.histogram) b /= static_cast<double>(luma.size());
  const MeanStd ms = mean_std(luma);
  bf.mean = ms.mean;
  bf.stddev = ms.stddev;
  return bf;
}

NoiseFeatures noise_features(const Frame& frame) {
  if (frame.width < 8 || frame.height < 8) {
    throw Error(ErrorCode::kShapeMismatch, "noise features require frames of at least 8x8");
  }
  const std::vector<double> luma = to_grayscale(frame);

  NoiseFeatures nf;
  nf.global = immerkaer_window(luma, frame.width, 0, 0, frame.width, frame.height);

  std::vector<double> cells;
  cells.reserve(16);
  for (int gy = 0; gy < 4; ++gy) {
    for (int gx = 0; gx < 4; ++gx) {
      const int x0 = gx * frame.width / 4;
      const int x1 = (gx + 1) * frame.width / 4;
      const int y0 = gy * frame.height / 4;
      const int y1 = (gy + 1) * frame.height / 4;
      cells.push_back(immerkaer_window(luma, frame.width, x0, y0, x1 - x0, y1 - y0));
    }
  }
  const MeanStd ms = mean_std(cells);
  nf.cell_mean = ms.mean;
  nf.cell_std = ms.stddev;
  nf.cell_min = *std::min_element(cells.begin(), cells.end());
  nf.cell_max = *std::max_element(cells.begin(), cells.end());
  int above = 0;
  for (double c : cells) {
    if (c > nf.global) ++above;
  }
  nf.above_fraction = above / 16.0;
  return nf;
}

ConsistencyFeatures brightness_consistency(const Video& clip) {
  if (clip.frames.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "brightness consistency requires at least one frame");
  }
  const size_t n = clip.frame_count();
  std::vector<double> b(n);
  for (size_t t = 0; t < n; ++t) {
    const std::vector<double> luma = to_grayscale(clip.frames[t]);
    double sum = 0.0;
    for (double v : luma) sum += v;
    b[t] = sum / luma.size();
  }

  ConsistencyFeatures cf;
  if (n == 1) return cf;  // all entries zero by contract

  const MeanStd ms = mean_std(b);
  cf.stddev = ms.stddev;

  double diff_sum = 0.0;
  for (size_t t = 0; t + 1 < n; ++t) {
    const double d = std::abs(b[t + 1] - b[t]);
    diff_sum += d;
    cf.max_abs_diff = std::max(cf.max_abs_diff, d);
  }
  cf.mean_abs_diff = diff_sum / static_cast<double>(n - 1);
  cf.range = *std::max_element(b.begin(), b.end()) - *std::min_element(b.begin(), b.end());

  // OLS slope of b against t = 0..n-1.
  const double t_mean = (n - 1) / 2.0;
  double num = 0.0, den = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const double dt = static_cast<double>(t) - t_mean;
    num += dt * (b[t] - ms.mean);
    den += dt * dt;
  }
  cf.slope = num / den;
  return cf;
}

VideoAttributes video_attributes(const Video& video, int stride) {
  if (stride < 1) throw Error(ErrorCode::kConfig, "attribute stride must be >= 1");
  if (video.frames.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "attributes require at least one frame");
  }

  double brightness = 0.0, contrast = 0.0, colorfulness = 0.0;
  size_t count = 0;
  for (size_t t = 0; t < video.frame_count(); t += static_cast<size_t>(stride)) {
    const Frame& frame = video.frames[t];
    const MeanStd gray = mean_std(to_grayscale(frame));
    brightness += gray.mean;
    contrast += gray.stddev;

    const uint8_t* r = frame.plane(0);
    const uint8_t* g = frame.plane(1);
    const uint8_t* b = frame.plane(2);
    const size_t n = frame.plane_size();
    double rg_sum = 0.0, yb_sum = 0.0, rg_sq = 0.0, yb_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double rg = static_cast<double>(r[i]) - g[i];
      const double yb = 0.5 * (static_cast<double>(r[i]) + g[i]) - b[i];
      rg_sum += rg;
      yb_sum += yb;
      rg_sq += rg * rg;
      yb_sq += yb * yb;
    }
    const double rg_mean = rg_sum / n;
    const double yb_mean = yb_sum / n;
    const double rg_var = rg_sq / n - rg_mean * rg_mean;
    const double yb_var = yb_sq / n - yb_mean * yb_mean;
    colorfulness += std::sqrt(std::max(0.0, rg_var + yb_var)) +
                    0.3 * std::sqrt(rg_mean * rg_mean + yb_mean * yb_mean);
    ++count;
  }

  VideoAttributes attrs;
  attrs.brightness = brightness / count;
  attrs.contrast = contrast / count;
  attrs.colorfulness = colorfulness / count;
  return attrs;
}

int default_attribute_stride(size_t frame_count) {
  return std::max<int>(1, static_cast<int>(frame_count / 8));
}

}  // namespace lvqa
