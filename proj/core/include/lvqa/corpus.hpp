#pragma once

#include <cstdint>
#include <utility>

#include "lvqa/frame.hpp"
#include "lvqa/handcrafted.hpp"

namespace lvqa {

// Synthetic low-light corpus: procedural scenes (moving gradient blobs over
// a textured background) rendered at full brightness, then darkened,
// flicker-modulated, and corrupted with Gaussian pixel noise. Everything is
// a pure function of (spec, index).
struct CorpusSpec {
  int n_sources = 10;
  int frames_per_video = 48;
  int width = 96;
  int height = 96;
  double fps = 24.0;
  uint64_t seed = 1;
  std::pair<double, double> darkness_range = {0.15, 0.85};   // luminance scale
  std::pair<double, double> noise_sigma_range = {0.0, 18.0}; // Gaussian sigma
  std::pair<double, double> flicker_range = {0.0, 0.22};     // relative amplitude

  void validate() const;
};

Video generate_source(const CorpusSpec& spec, int index);

// Per-channel gamma brightening: out = 255 * (in/255)^(1/gamma).
Video enhance_gamma(const Video& video, double gamma);

// Per-frame global histogram equalization on luminance; chroma preserved by
// per-pixel luminance ratio scaling, clamped. Degenerate histograms (all
// pixels in one bin) leave the frame unchanged.
Video enhance_ghe(const Video& video);

// Analytic stand-in for subjective scores. The closed form combines a
// spatial quality factor and a temporal one by worst-aspect dominance:
// whichever branch is worse bounds the score, so the two branches are not
// separable and no additive combination of per-branch scores can match the
// ordering:
//   adequacy = exp(-(brightness - brightness_opt)^2 / (2 * brightness_width^2))
//   spatial  = clamp01(base + w_brightness * adequacy
//                           + w_contrast * min(1, contrast / contrast_ref)
//                           - w_noise    * min(1, noise / noise_ref))
//   temporal = clamp01(1 - w_flicker * min(1, flicker / flicker_ref))
//   score    = 100 * min(spatial, temporal)
// where noise is the mean global noise estimate over strided frames and
// flicker is the mean absolute per-frame luminance step over all frames.
// Monotone nonincreasing in measured noise and flicker by construction.
struct PseudoMosModel {
  double base = 0.10;
  double w_brightness = 0.55;
  double brightness_opt = 115.0;
  double brightness_width = 55.0;
  double w_contrast = 0.25;
  double contrast_ref = 60.0;
  double w_noise = 0.45;
  double noise_ref = 30.0;
  double w_flicker = 0.9;
  double flicker_ref = 6.0;
};

// Attribute measurements feeding the pseudo-MOS, exposed so tests can
// recompute the score independently.
struct PseudoMosInputs {
  double brightness = 0.0;
  double contrast = 0.0;
  double noise = 0.0;
  double flicker = 0.0;
};

PseudoMosInputs measure_pseudo_mos_inputs(const Video& video);
double pseudo_mos_from_inputs(const PseudoMosInputs& inputs, const PseudoMosModel& model);
double pseudo_mos(const Video& video, const PseudoMosModel& model);

}  // namespace lvqa
