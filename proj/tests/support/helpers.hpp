#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lvqa/frame.hpp"
#include "lvqa/rng.hpp"

namespace helpers {

inline lvqa::Frame constant_frame(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  lvqa::Frame frame(w, h);
  std::fill(frame.plane(0), frame.plane(0) + frame.plane_size(), r);
  std::fill(frame.plane(1), frame.plane(1) + frame.plane_size(), g);
  std::fill(frame.plane(2), frame.plane(2) + frame.plane_size(), b);
  return frame;
}

inline lvqa::Frame gray_frame(int w, int h, uint8_t v) { return constant_frame(w, h, v, v, v); }

inline lvqa::Frame random_frame(lvqa::Rng& rng, int w, int h) {
  lvqa::Frame frame(w, h);
  for (uint8_t& p : frame.pixels) p = static_cast<uint8_t>(rng.next_below(256));
  return frame;
}

inline lvqa::Video video_of_frames(std::vector<lvqa::Frame> frames, double fps = 30.0) {
  lvqa::Video video;
  video.fps = fps;
  video.frames = std::move(frames);
  return video;
}

// Gray video with one mean luminance value per frame.
inline lvqa::Video gray_video(const std::vector<uint8_t>& levels, int w = 16, int h = 16) {
  std::vector<lvqa::Frame> frames;
  frames.reserve(levels.size());
  for (uint8_t v : levels) frames.push_back(gray_frame(w, h, v));
  return video_of_frames(std::move(frames));
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lvqa-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace helpers
