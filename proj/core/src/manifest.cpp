#include "lvqa/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lvqa/error.hpp"

namespace lvqa {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest: " + path.string());

  std::vector<ManifestEntry> entries;
  std::set<std::string> seen_paths;
  std::string line;
  bool header_seen = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    if (!header_seen) {
      if (trimmed != "video_path,source_id,mos,split") {
        throw Error(ErrorCode::kFormat,
                    "manifest must start with header video_path,source_id,mos,split, got: " + trimmed);
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(trimmed);
    if (fields.size() != 4) {
      throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) +
                                          " has " + std::to_string(fields.size()) +
                                          " fields, expected 4");
    }
    ManifestEntry entry;
    entry.video_path = trim(fields[0]);
    entry.source_id = trim(fields[1]);
    entry.split = trim(fields[3]);
    try {
      entry.mos = std::stod(trim(fields[2]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": bad mos");
    }
    if (entry.video_path.empty()) {
      throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": empty path");
    }
    if (entry.source_id.empty()) {
      throw Error(ErrorCode::kFormat,
                  "manifest line " + std::to_string(line_no) + ": empty source id");
    }
    if (entry.mos < 0.0 || entry.mos > 100.0) {
      throw Error(ErrorCode::kFormat,
                  "manifest line " + std::to_string(line_no) + ": mos out of [0,100]");
    }
    if (entry.split != "train" && entry.split != "val" && entry.split != "test" &&
        entry.split != "auto") {
      throw Error(ErrorCode::kFormat,
                  "manifest line " + std::to_string(line_no) + ": bad split '" + entry.split + "'");
    }
    if (!seen_paths.insert(entry.video_path).second) {
      throw Error(ErrorCode::kFormat, "duplicate manifest path: " + entry.video_path);
    }
    entries.push_back(std::move(entry));
  }
  if (!header_seen) throw Error(ErrorCode::kFormat, "manifest is empty: " + path.string());
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                    const std::string& config_hash_comment) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  if (!config_hash_comment.empty()) out << "# config_hash=" << config_hash_comment << "\n";
  out << "video_path,source_id,mos,split\n";
  char mos_buf[32];
  for (const ManifestEntry& e : entries) {
    std::snprintf(mos_buf, sizeof(mos_buf), "%.6f", e.mos);
    out << e.video_path << "," << e.source_id << "," << mos_buf << "," << e.split << "\n";
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::filesystem::path resolve_video_path(const std::filesystem::path& manifest_path,
                                         const ManifestEntry& entry) {
  const std::filesystem::path video(entry.video_path);
  if (video.is_absolute()) return video;
  return manifest_path.parent_path() / video;
}

}  // namespace lvqa
