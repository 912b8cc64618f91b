#include "lvqa/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lvqa/error.hpp"
#include "lvqa/media_io.hpp"
#include "lvqa/rng.hpp"

namespace lvqa {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::lround(v) * 1.0)));
}

struct Blob {
  double x, y, vx, vy, radius;
  std::array<double, 3> color;
};

// Static per-pixel texture in [-1,1], hashed from the scene seed.
double texture_noise(uint64_t scene_seed, int x, int y) {
  uint64_t h = scene_seed;
  h = fnv1a64(&x, sizeof(x), h);
  h = fnv1a64(&y, sizeof(y), h);
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_sources < 1) throw Error(ErrorCode::kConfig, "corpus needs at least one source");
  if (frames_per_video < 2) throw Error(ErrorCode::kConfig, "videos need at least 2 frames");
  if (width < 8 || height < 8) throw Error(ErrorCode::kConfig, "corpus frames must be >= 8x8");
  auto check_range = [](std::pair<double, double> r, double lo, double hi, const char* name) {
    if (r.first > r.second || r.first < lo || r.second > hi) {
      throw Error(ErrorCode::kConfig, std::string("invalid range for ") + name);
    }
  };
  check_range(darkness_range, 0.01, 1.0, "darkness");
  check_range(noise_sigma_range, 0.0, 64.0, "noise sigma");
  check_range(flicker_range, 0.0, 0.5, "flicker amplitude");
}

Video generate_source(const CorpusSpec& spec, int index) {
  spec.validate();
  Rng rng(Rng::derive(spec.seed, 0xC0D5 + static_cast<uint64_t>(index)));

  // Scene parameters are drawn first, in a fixed order, so collapsing one
  // range (e.g. darkness) never perturbs the rest of the scene.
  const double darkness = rng.uniform(spec.darkness_range.first, spec.darkness_range.second);
  const double sigma = rng.uniform(spec.noise_sigma_range.first, spec.noise_sigma_range.second);
  const double flicker_amp = rng.uniform(spec.flicker_range.first, spec.flicker_range.second);
  const double flicker_period = rng.uniform(8.0, 20.0);
  const double flicker_phase = rng.uniform(0.0, kTwoPi);

  const uint64_t scene_seed = rng.next_u64();
  std::array<double, 3> wave_freq, wave_phase;
  for (int c = 0; c < 3; ++c) {
    wave_freq[c] = rng.uniform(1.0 / 48.0, 1.0 / 12.0);
    wave_phase[c] = rng.uniform(0.0, kTwoPi);
  }

  const int n_blobs = 2 + static_cast<int>(rng.next_below(3));
  std::vector<Blob> blobs(n_blobs);
  for (Blob& blob : blobs) {
    blob.x = rng.uniform(0.0, spec.width);
    blob.y = rng.uniform(0.0, spec.height);
    blob.vx = rng.uniform(-2.5, 2.5);
    blob.vy = rng.uniform(-2.5, 2.5);
    blob.radius = rng.uniform(0.08, 0.20) * std::min(spec.width, spec.height);
    for (double& c : blob.color) c = rng.uniform(90.0, 255.0);
  }

  Video video;
  video.fps = spec.fps;
  video.frames.reserve(spec.frames_per_video);

  for (int t = 0; t < spec.frames_per_video; ++t) {
    Frame frame(spec.width, spec.height);
    const double flicker = 1.0 + flicker_amp * std::sin(kTwoPi * t / flicker_period + flicker_phase);

    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double tex = 25.0 * texture_noise(scene_seed, x, y);
        std::array<double, 3> rgb = {
            120.0 + 55.0 * std::sin(kTwoPi * wave_freq[0] * x + wave_phase[0]) + tex,
            120.0 + 55.0 * std::sin(kTwoPi * wave_freq[1] * y + wave_phase[1]) + tex,
            120.0 + 55.0 * std::sin(kTwoPi * wave_freq[2] * (x + y) + wave_phase[2]) + tex,
        };
        for (const Blob& blob : blobs) {
          // Bouncing linear motion, reflected into [0, edge).
          auto reflect = [](double p, double edge) {
            const double period = 2.0 * edge;
            double m = std::fmod(p, period);
            if (m < 0) m += period;
            return m < edge ? m : period - m;
          };
          const double bx = reflect(blob.x + blob.vx * t, spec.width);
          const double by = reflect(blob.y + blob.vy * t, spec.height);
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          const double falloff = std::exp(-d2 / (2.0 * blob.radius * blob.radius));
          for (int c = 0; c < 3; ++c) rgb[c] += blob.color[c] * falloff;
        }
        for (int c = 0; c < 3; ++c) {
          const double lit = std::min(255.0, std::max(0.0, rgb[c]));
          const double value = lit * darkness * flicker + (sigma > 0.0 ? sigma * rng.next_gaussian() : 0.0);
          frame.at(c, x, y) = clamp_u8(value);
        }
      }
    }
    video.frames.push_back(std::move(frame));
  }
  return video;
}

Video enhance_gamma(const Video& video, double gamma) {
  if (gamma <= 0.0) throw Error(ErrorCode::kConfig, "gamma must be positive");
  std::array<uint8_t, 256> lut;
  for (int v = 0; v < 256; ++v) {
    lut[v] = clamp_u8(255.0 * std::pow(v / 255.0, 1.0 / gamma));
  }
  Video out;
  out.fps = video.fps;
  out.frames.reserve(video.frame_count());
  for (const Frame& frame : video.frames) {
    Frame enhanced(frame.width, frame.height);
    for (size_t i = 0; i < frame.pixels.size(); ++i) enhanced.pixels[i] = lut[frame.pixels[i]];
    out.frames.push_back(std::move(enhanced));
  }
  return out;
}

Video enhance_ghe(const Video& video) {
  Video out;
  out.fps = video.fps;
  out.frames.reserve(video.frame_count());
  for (const Frame& frame : video.frames) {
    const std::vector<double> luma = to_grayscale(frame);
    std::array<size_t, 256> hist{};
    for (double y : luma) ++hist[static_cast<int>(std::lround(y))];

    std::array<size_t, 256> cdf{};
    size_t running = 0;
    size_t cdf_min = 0;
    bool found_min = false;
    for (int v = 0; v < 256; ++v) {
      running += hist[v];
      cdf[v] = running;
      if (!found_min && hist[v] > 0) {
        cdf_min = running;
        found_min = true;
      }
    }

    const size_t n = luma.size();
    Frame enhanced(frame.width, frame.height);
    if (n == cdf_min) {
      // Degenerate histogram: equalization is the identity.
      enhanced = frame;
    } else {
      std::array<double, 256> mapping{};
      for (int v = 0; v < 256; ++v) {
        mapping[v] = 255.0 * (static_cast<double>(cdf[v]) - cdf_min) / (n - cdf_min);
      }
      const uint8_t* r = frame.plane(0);
      const uint8_t* g = frame.plane(1);
      const uint8_t* b = frame.plane(2);
      for (size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(std::lround(luma[i]));
        const double target = mapping[y];
        if (luma[i] <= 0.0) {
          // Black pixels carry no chroma to scale; lift to gray.
          const uint8_t v = clamp_u8(target);
          enhanced.plane(0)[i] = v;
          enhanced.plane(1)[i] = v;
          enhanced.plane(2)[i] = v;
        } else {
          const double ratio = target / luma[i];
          enhanced.plane(0)[i] = clamp_u8(r[i] * ratio);
          enhanced.plane(1)[i] = clamp_u8(g[i] * ratio);
          enhanced.plane(2)[i] = clamp_u8(b[i] * ratio);
        }
      }
    }
    out.frames.push_back(std::move(enhanced));
  }
  return out;
}

PseudoMosInputs measure_pseudo_mos_inputs(const Video& video) {
  PseudoMosInputs inputs;
  const int stride = default_attribute_stride(video.frame_count());
  const VideoAttributes attrs = video_attributes(video, stride);
  inputs.brightness = attrs.brightness;
  inputs.contrast = attrs.contrast;

  double noise_sum = 0.0;
  size_t noise_count = 0;
  for (size_t t = 0; t < video.frame_count(); t += static_cast<size_t>(stride)) {
    noise_sum += noise_features(video.frames[t]).global;
    ++noise_count;
  }
  inputs.noise = noise_sum / noise_count;

  inputs.flicker = brightness_consistency(video).mean_abs_diff;
  return inputs;
}

double pseudo_mos_from_inputs(const PseudoMosInputs& in, const PseudoMosModel& m) {
  const auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  const double d = in.brightness - m.brightness_opt;
  const double adequacy = std::exp(-d * d / (2.0 * m.brightness_width * m.brightness_width));
  const double spatial = clamp01(m.base + m.w_brightness * adequacy +
                                 m.w_contrast * std::min(1.0, in.contrast / m.contrast_ref) -
                                 m.w_noise * std::min(1.0, in.noise / m.noise_ref));
  const double temporal = clamp01(1.0 - m.w_flicker * std::min(1.0, in.flicker / m.flicker_ref));
  return 100.0 * std::min(spatial, temporal);
}

double pseudo_mos(const Video& video, const PseudoMosModel& model) {
  return pseudo_mos_from_inputs(measure_pseudo_mos_inputs(video), model);
}

}  // namespace lvqa
