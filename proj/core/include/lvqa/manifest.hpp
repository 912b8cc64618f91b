#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lvqa {

// One manifest row. video_path may be relative; it is resolved against the
// manifest file's directory, which keeps corpora relocatable.
struct ManifestEntry {
  std::string video_path;
  std::string source_id;  // groups enhanced variants with their original
  double mos = 0.0;       // [0,100]
  std::string split = "auto";  // train | val | test | auto
};

// CSV with header video_path,source_id,mos,split. Lines starting with '#'
// are comments (the corpus generator records its config hash there).
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries,
                    const std::string& config_hash_comment = "");

std::filesystem::path resolve_video_path(const std::filesystem::path& manifest_path,
                                         const ManifestEntry& entry);

}  // namespace lvqa
