#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lymebench/common.hpp"

namespace lymebench {

// Canonical binary classes. EM is the positive class everywhere downstream.
inline constexpr const char* kPositiveClass = "EM";
inline constexpr const char* kNegativeClass = "Confuser";

struct ImageRecord {
  std::string id;       // unique within a manifest
  std::string path;
  std::string label;    // one of the manifest's two class names
  std::string source;   // free-form provenance tag
  uint64_t phash = 0;   // 64-bit difference hash
};

struct Manifest {
  std::vector<ImageRecord> records;
  std::array<std::string, 2> class_names = {kPositiveClass, kNegativeClass};

  std::map<std::string, size_t> class_counts() const;
  const ImageRecord& by_id(const std::string& id) const;
  bool has_id(const std::string& id) const;
  size_t size() const { return records.size(); }
};

struct IngestResult {
  Manifest manifest;
  size_t skipped_files = 0;  // non-image / undecodable files under the class dirs
};

// Walks root/<class>/ for the two class subdirectories given by `labeling`
// (subdirectory name -> class name). Every decodable image becomes a record
// with its phash computed; anything else bumps skipped_files.
IngestResult ingest_directory(const fs::path& root,
                              const std::map<std::string, std::string>& labeling);

// Convenience: subdirectories named exactly after the canonical classes.
IngestResult ingest_directory(const fs::path& root);

// Keeps the first record of each near-duplicate group (manifest order).
// Post: no two surviving records are within `threshold` Hamming distance.
Manifest dedup(const Manifest& m, int threshold = 0);

void write_manifest_csv(const fs::path& path, const Manifest& m);
Manifest read_manifest_csv(const fs::path& path);

}  // namespace lymebench
