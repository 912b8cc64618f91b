#include "lvqa/media_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lvqa/error.hpp"

namespace lvqa {
namespace {

constexpr int kMinDecodedEdge = 8;

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kFormat, std::string("unexpected end of stream reading ") + what);
  }
  return line;
}

uint8_t clamp_u8(double v) {
  const double r = std::lround(v);
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
}

struct Y4mHeader {
  int width = 0;
  int height = 0;
  double fps = 30.0;
  int chroma_div = 2;  // 2 for 4:2:0, 1 for 4:4:4
};

Y4mHeader parse_y4m_header(const std::string& line) {
  Y4mHeader h;
  std::istringstream ss(line);
  std::string tok;
  ss >> tok;  // "YUV4MPEG2"
  bool have_w = false, have_h = false;
  while (ss >> tok) {
    if (tok.size() < 2) throw Error(ErrorCode::kFormat, "bad Y4M parameter: " + tok);
    const std::string val = tok.substr(1);
    switch (tok[0]) {
      case 'W':
        h.width = std::stoi(val);
        have_w = true;
        break;
      case 'H':
        h.height = std::stoi(val);
        have_h = true;
        break;
      case 'F': {
        const auto colon = val.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::kFormat, "bad Y4M frame rate: " + tok);
        const double num = std::stod(val.substr(0, colon));
        const double den = std::stod(val.substr(colon + 1));
        if (den <= 0) throw Error(ErrorCode::kFormat, "bad Y4M frame rate: " + tok);
        h.fps = num / den;
        break;
      }
      case 'C':
        if (val.rfind("420", 0) == 0) {
          h.chroma_div = 2;
        } else if (val.rfind("444", 0) == 0) {
          h.chroma_div = 1;
        } else {
          throw Error(ErrorCode::kFormat, "unsupported Y4M chroma sampling: " + tok);
        }
        break;
      case 'I':
      case 'A':
      case 'X':
        break;  // interlacing/aspect/extensions: ignored
      default:
        throw Error(ErrorCode::kFormat, "unknown Y4M parameter: " + tok);
    }
  }
  if (!have_w || !have_h) throw Error(ErrorCode::kFormat, "Y4M header missing W or H");
  if (h.width < kMinDecodedEdge || h.height < kMinDecodedEdge) {
    throw Error(ErrorCode::kFormat, "video frames must be at least 8x8");
  }
  if (h.chroma_div == 2 && (h.width % 2 != 0 || h.height % 2 != 0)) {
    throw Error(ErrorCode::kFormat, "4:2:0 Y4M requires even dimensions");
  }
  return h;
}

// BT.601 full-range YCbCr -> RGB.
Frame yuv_to_rgb(const std::vector<uint8_t>& y, const std::vector<uint8_t>& cb,
                 const std::vector<uint8_t>& cr, int w, int h, int chroma_div) {
  constexpr double kCrToR = 1.402;
  constexpr double kCbToB = 1.772;
  constexpr double kCrToG = 0.299 * 1.402 / 0.587;
  constexpr double kCbToG = 0.114 * 1.772 / 0.587;

  Frame frame(w, h);
  const int cw = w / chroma_div;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const size_t ci = static_cast<size_t>(yy / chroma_div) * cw + xx / chroma_div;
      const double Y = y[static_cast<size_t>(yy) * w + xx];
      const double Cb = static_cast<double>(cb[ci]) - 128.0;
      const double Cr = static_cast<double>(cr[ci]) - 128.0;
      frame.at(0, xx, yy) = clamp_u8(Y + kCrToR * Cr);
      frame.at(1, xx, yy) = clamp_u8(Y - kCbToG * Cb - kCrToG * Cr);
      frame.at(2, xx, yy) = clamp_u8(Y + kCbToB * Cb);
    }
  }
  return frame;
}

Video load_y4m(std::istream& in) {
  const Y4mHeader h = parse_y4m_header(read_line(in, "Y4M header"));
  const size_t luma = static_cast<size_t>(h.width) * h.height;
  const size_t chroma = luma / (static_cast<size_t>(h.chroma_div) * h.chroma_div);

  Video video;
  video.fps = h.fps;
  std::vector<uint8_t> y(luma), cb(chroma), cr(chroma);
  for (size_t index = 0;; ++index) {
    std::string frame_line;
    if (!std::getline(in, frame_line)) break;  // clean EOF
    if (frame_line.rfind("FRAME", 0) != 0) {
      throw Error(ErrorCode::kFormat, "expected FRAME marker before frame " + std::to_string(index));
    }
    auto read_plane = [&](std::vector<uint8_t>& plane) {
      in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(plane.size()));
      if (static_cast<size_t>(in.gcount()) != plane.size()) {
        throw Error(ErrorCode::kTruncated,
                    "truncated Y4M payload in frame " + std::to_string(index));
      }
    };
    read_plane(y);
    read_plane(cb);
    read_plane(cr);
    video.frames.push_back(yuv_to_rgb(y, cb, cr, h.width, h.height, h.chroma_div));
  }
  if (video.frames.empty()) throw Error(ErrorCode::kFormat, "Y4M stream contains no frames");
  return video;
}

Video load_rgbv(std::istream& in) {
  std::string magic = read_line(in, "RGBV magic");
  if (magic != "RGBV1") throw Error(ErrorCode::kFormat, "bad RGBV magic");
  const std::string header = read_line(in, "RGBV header");
  int w = 0, h = 0, n = 0, fps = 0;
  if (std::sscanf(header.c_str(), "w=%d h=%d n=%d fps=%d", &w, &h, &n, &fps) != 4) {
    throw Error(ErrorCode::kFormat, "malformed RGBV header: " + header);
  }
  if (w < kMinDecodedEdge || h < kMinDecodedEdge || n < 1 || fps < 1) {
    throw Error(ErrorCode::kFormat, "RGBV header values out of range: " + header);
  }
  Video video;
  video.fps = fps;
  const size_t frame_bytes = 3u * static_cast<size_t>(w) * h;
  for (int i = 0; i < n; ++i) {
    Frame frame(w, h);
    in.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(frame_bytes));
    if (static_cast<size_t>(in.gcount()) != frame_bytes) {
      throw Error(ErrorCode::kTruncated, "truncated RGBV payload in frame " + std::to_string(i));
    }
    video.frames.push_back(std::move(frame));
  }
  return video;
}

}  // namespace

Video load_video(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open video file: " + path.string());

  char magic[9] = {};
  in.read(magic, 9);
  if (in.gcount() < 5) throw Error(ErrorCode::kFormat, "file too short: " + path.string());
  in.clear();
  in.seekg(0);

  if (std::memcmp(magic, "YUV4MPEG2", 9) == 0) return load_y4m(in);
  if (std::memcmp(magic, "RGBV1", 5) == 0) return load_rgbv(in);
  throw Error(ErrorCode::kFormat, "unrecognized video container: " + path.string());
}

Video load_video_bytes(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 5) throw Error(ErrorCode::kFormat, "file too short: " + name);
  std::istringstream in(bytes);
  if (bytes.rfind("YUV4MPEG2", 0) == 0) return load_y4m(in);
  if (bytes.rfind("RGBV1", 0) == 0) return load_rgbv(in);
  throw Error(ErrorCode::kFormat, "unrecognized video container: " + name);
}

void save_rgbv(const std::filesystem::path& path, const Video& video) {
  if (video.frames.empty()) throw Error(ErrorCode::kConfig, "refusing to write empty video");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "RGBV1\n";
  out << "w=" << video.width() << " h=" << video.height() << " n=" << video.frame_count()
      << " fps=" << static_cast<int>(std::lround(video.fps)) << "\n";
  for (const Frame& frame : video.frames) {
    out.write(reinterpret_cast<const char*>(frame.pixels.data()),
              static_cast<std::streamsize>(frame.pixels.size()));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<double> to_grayscale(const Frame& frame) {
  std::vector<double> luma(frame.plane_size());
  const uint8_t* r = frame.plane(0);
  const uint8_t* g = frame.plane(1);
  const uint8_t* b = frame.plane(2);
  for (size_t i = 0; i < luma.size(); ++i) {
    // B + 0.299(R-B) + 0.587(G-B) is algebraically the BT.601 sum but exact
    // for achromatic pixels, where Y must equal the channel value.
    const double bd = b[i];
    luma[i] = bd + 0.299 * (r[i] - bd) + 0.587 * (g[i] - bd);
  }
  return luma;
}

Frame resize_bilinear(const Frame& frame, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw Error(ErrorCode::kConfig, "resize target must be positive");
  Frame out(out_w, out_h);
  const double sx = static_cast<double>(frame.width) / out_w;
  const double sy = static_cast<double>(frame.height) / out_h;
  for (int p = 0; p < 3; ++p) {
    const uint8_t* src = frame.plane(p);
    uint8_t* dst = out.plane(p);
    for (int y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      fy = std::min(std::max(fy, 0.0), static_cast<double>(frame.height - 1));
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, frame.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = std::min(std::max(fx, 0.0), static_cast<double>(frame.width - 1));
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, frame.width - 1);
        const double wx = fx - x0;
        const double top = (1.0 - wx) * src[static_cast<size_t>(y0) * frame.width + x0] +
                           wx * src[static_cast<size_t>(y0) * frame.width + x1];
        const double bot = (1.0 - wx) * src[static_cast<size_t>(y1) * frame.width + x0] +
                           wx * src[static_cast<size_t>(y1) * frame.width + x1];
        dst[static_cast<size_t>(y) * out_w + x] = clamp_u8((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

std::pair<size_t, size_t> clip_range(size_t frame_count, int k, int clip_index) {
  const auto t = static_cast<unsigned long long>(frame_count);
  const auto kk = static_cast<unsigned long long>(k);
  const auto i = static_cast<unsigned long long>(clip_index);
  return {static_cast<size_t>(i * t / kk), static_cast<size_t>((i + 1) * t / kk)};
}

std::vector<KeyFrame> sample_key_frames(const Video& video, const SamplingPlan& plan) {
  plan.validate();
  const size_t t = video.frame_count();
  if (t < static_cast<size_t>(plan.k)) {
    throw Error(ErrorCode::kInsufficientFrames,
                "video has " + std::to_string(t) + " frames, sampling plan needs " +
                    std::to_string(plan.k));
  }
  std::vector<KeyFrame> keys;
  keys.reserve(plan.k);
  for (int i = 0; i < plan.k; ++i) {
    const size_t index = static_cast<size_t>(static_cast<unsigned long long>(i) * t / plan.k);
    keys.push_back(KeyFrame{index, video.frames[index]});
  }
  return keys;
}

std::vector<Video> split_clips(const Video& video, const SamplingPlan& plan) {
  plan.validate();
  const size_t t = video.frame_count();
  if (t < static_cast<size_t>(plan.k)) {
    throw Error(ErrorCode::kInsufficientFrames,
                "video has " + std::to_string(t) + " frames, sampling plan needs " +
                    std::to_string(plan.k));
  }
  std::vector<Video> clips;
  clips.reserve(plan.k);
  for (int i = 0; i < plan.k; ++i) {
    const auto [begin, end] = clip_range(t, plan.k, i);
    Video clip;
    clip.fps = video.fps;
    clip.frames.reserve(end - begin);
    for (size_t f = begin; f < end; ++f) {
      clip.frames.push_back(resize_bilinear(video.frames[f], plan.clip_edge, plan.clip_edge));
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace lvqa
