#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lvqa/frame.hpp"

namespace lvqa {

// Decodes a Y4M stream (C420*/C444) or a raw-RGBV container; the format is
// detected from the leading magic bytes. Y4M chroma is upsampled by nearest
// neighbor and converted with the BT.601 full-range matrix.
Video load_video(const std::filesystem::path& path);

// Same decoder over an in-memory buffer; `name` is used in error messages.
Video load_video_bytes(const std::string& bytes, const std::string& name);

// raw-RGBV container: "RGBV1\n", then "w=<int> h=<int> n=<int> fps=<int>\n",
// then n*3*w*h bytes of planar frames (frame-major, plane order R,G,B).
void save_rgbv(const std::filesystem::path& path, const Video& video);

// BT.601 luma, Y = 0.299 R + 0.587 G + 0.114 B, one double per pixel.
std::vector<double> to_grayscale(const Frame& frame);

// Standard bilinear resampling with half-pixel-centered coordinates.
// Output channels are rounded to nearest and clamped to [0,255].
Frame resize_bilinear(const Frame& frame, int out_w, int out_h);

struct KeyFrame {
  size_t source_index = 0;
  Frame frame;
};

// The i-th key frame (i = 0..k-1) is frame floor(i*T/k), at original
// resolution. Throws kInsufficientFrames when T < k.
std::vector<KeyFrame> sample_key_frames(const Video& video, const SamplingPlan& plan);

// Clip i covers frames [floor(i*T/k), floor((i+1)*T/k)); the clips partition
// 0..T-1. Every clip frame is resized to clip_edge x clip_edge.
std::vector<Video> split_clips(const Video& video, const SamplingPlan& plan);

// Frame range of clip i under the same partition rule, without materializing
// the clip.
std::pair<size_t, size_t> clip_range(size_t frame_count, int k, int clip_index);

}  // namespace lvqa
