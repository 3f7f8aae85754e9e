#include "lymebench/manifest.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

#include "lymebench/image.hpp"

namespace lymebench {

std::map<std::string, size_t> Manifest::class_counts() const {
  std::map<std::string, size_t> counts;
  for (const auto& name : class_names) counts[name] = 0;
  for (const auto& r : records) ++counts[r.label];
  return counts;
}

const ImageRecord& Manifest::by_id(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  fail("manifest has no record with id: " + id);
}

bool Manifest::has_id(const std::string& id) const {
  return std::any_of(records.begin(), records.end(),
                     [&](const ImageRecord& r) { return r.id == id; });
}

IngestResult ingest_directory(const fs::path& root,
                              const std::map<std::string, std::string>& labeling) {
  if (!fs::exists(root) || !fs::is_directory(root))
    fail("dataset root is not a readable directory: " + root.string());
  if (labeling.size() != 2) fail("labeling rule must map exactly two subdirectories");

  IngestResult result;
  {
    auto it = labeling.begin();
    std::array<std::string, 2> classes = {it->second, std::next(it)->second};
    // keep the positive class first when present
    if (classes[1] == kPositiveClass) std::swap(classes[0], classes[1]);
    result.manifest.class_names = classes;
  }

  // positive class first, independent of the labeling map's key order
  std::vector<std::pair<std::string, std::string>> ordered(labeling.begin(), labeling.end());
  std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    return (a.second == result.manifest.class_names[0]) >
           (b.second == result.manifest.class_names[0]);
  });

  for (const auto& [subdir, cls] : ordered) {
    const fs::path dir = root / subdir;
    if (!fs::exists(dir) || !fs::is_directory(dir))
      fail("class subdirectory missing: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    size_t class_count = 0;
    for (const auto& file : files) {
      Image img;
      try {
        img = load_image(file);
      } catch (const Error&) {
        ++result.skipped_files;
        continue;
      }
      ImageRecord rec;
      rec.id = subdir + "/" + file.filename().string();
      rec.path = file.string();
      rec.label = cls;
      rec.source = "local";
      rec.phash = dhash64(img);
      result.manifest.records.push_back(std::move(rec));
      ++class_count;
    }
    if (class_count == 0) fail("class has zero images: " + cls + " (" + dir.string() + ")");
  }

  // ids must be unique; duplicate file names across class dirs are prefixed already
  std::vector<std::string> ids;
  ids.reserve(result.manifest.records.size());
  for (const auto& r : result.manifest.records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    fail("duplicate record ids produced during ingest");

  return result;
}

IngestResult ingest_directory(const fs::path& root) {
  return ingest_directory(root, {{kPositiveClass, kPositiveClass},
                                 {kNegativeClass, kNegativeClass}});
}

Manifest dedup(const Manifest& m, int threshold) {
  if (threshold < 0 || threshold > 64) fail("dedup threshold must be in [0, 64]");
  Manifest out;
  out.class_names = m.class_names;
  std::vector<uint64_t> kept_hashes;
  for (const auto& r : m.records) {
    bool duplicate = false;
    for (uint64_t h : kept_hashes) {
      if (hamming64(h, r.phash) <= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      kept_hashes.push_back(r.phash);
      out.records.push_back(r);
    }
  }
  return out;
}

void write_manifest_csv(const fs::path& path, const Manifest& m) {
  std::ostringstream out;
  out << "id,path,label,source,phash\n";
  for (const auto& r : m.records) {
    out << csv_escape(r.id) << ',' << csv_escape(r.path) << ',' << csv_escape(r.label) << ','
        << csv_escape(r.source) << ',' << phash_to_hex(r.phash) << '\n';
  }
  write_text_file(path, out.str());
}

Manifest read_manifest_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty()) fail("empty manifest file: " + path.string());
  if (lines[0] != "id,path,label,source,phash")
    fail("unexpected manifest header in " + path.string() + ": " + lines[0]);

  Manifest m;
  std::vector<std::string> seen_labels;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 5) fail("bad manifest row " + std::to_string(i + 1) + " in " + path.string());
    ImageRecord r;
    r.id = f[0];
    r.path = f[1];
    r.label = f[2];
    r.source = f[3];
    r.phash = phash_from_hex(f[4]);
    if (std::find(seen_labels.begin(), seen_labels.end(), r.label) == seen_labels.end())
      seen_labels.push_back(r.label);
    m.records.push_back(std::move(r));
  }
  if (seen_labels.size() > 2) fail("manifest has more than two classes: " + path.string());
  if (!seen_labels.empty()) {
    // keep canonical order if the canonical positive class is present
    if (seen_labels.size() == 2 && seen_labels[1] == kPositiveClass)
      std::swap(seen_labels[0], seen_labels[1]);
    m.class_names[0] = seen_labels[0];
    m.class_names[1] = seen_labels.size() > 1 ? seen_labels[1] : std::string(kNegativeClass);
  }
  return m;
}

}  // namespace lymebench
