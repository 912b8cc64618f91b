#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "lvqa/error.hpp"

namespace lvqa {

// One decoded frame: planar 8-bit RGB, row-major within each plane, plane
// order R,G,B. Decoded video frames are at least 8x8 (enforced by the
// loaders); scratch frames used for resize targets may be smaller.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // size 3*width*height

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), pixels(3u * static_cast<size_t>(w) * h, 0) {
    if (w < 1 || h < 1) throw Error(ErrorCode::kFormat, "frame dimensions must be positive");
  }

  size_t plane_size() const { return static_cast<size_t>(width) * height; }

  uint8_t& at(int plane, int x, int y) {
    return pixels[plane * plane_size() + static_cast<size_t>(y) * width + x];
  }
  uint8_t at(int plane, int x, int y) const {
    return pixels[plane * plane_size() + static_cast<size_t>(y) * width + x];
  }

  const uint8_t* plane(int p) const { return pixels.data() + p * plane_size(); }
  uint8_t* plane(int p) { return pixels.data() + p * plane_size(); }
};

struct Video {
  std::vector<Frame> frames;
  double fps = 30.0;  // informational

  size_t frame_count() const { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
};

// How a video is turned into k key frames and k clips.
struct SamplingPlan {
  int k = 8;           // number of key frames / clips
  int clip_edge = 64;  // clips are resized to clip_edge x clip_edge

  void validate() const {
    if (k < 1) throw Error(ErrorCode::kConfig, "sampling plan requires k >= 1");
    if (clip_edge < 16) throw Error(ErrorCode::kConfig, "sampling plan requires clip_edge >= 16");
  }
};

}  // namespace lvqa
