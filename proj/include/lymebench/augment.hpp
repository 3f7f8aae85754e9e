#pragma once

#include <string>
#include <vector>

#include "lymebench/common.hpp"
#include "lymebench/image.hpp"
#include "lymebench/manifest.hpp"

namespace lymebench {

enum class AugKind {
  FlipLrOrUd,
  SmallRotation,
  RightAngleRotation,
  Brightness,
  Contrast,
  Saturation,
  PerspectiveSkew,
};

const char* aug_kind_name(AugKind k);

struct AugOp {
  AugKind kind;
  double probability = 0.5;
  double max_deg = 5.0;     // SmallRotation
  double min_f = 0.7;       // Brightness / Contrast / Saturation lower factor
  double max_f = 1.3;       //   ... upper factor
  double magnitude = 0.10;  // PerspectiveSkew: corner shift, fraction of shorter side
};

struct AugmentationSpec {
  std::vector<AugOp> ops;
  int expansion_factor = 20;

  void validate() const;
};

// The harness's standard stochastic recipe: each of the seven op families at
// probability 0.5, small rotations up to 5 degrees, right-angle rotations
// from {90, 180, 270}, brightness/contrast/saturation factors in [0.7, 1.3],
// perspective skew, twenty replicas per source image.
AugmentationSpec standard_augmentation_spec();

struct ApplyResult {
  Image image;
  std::string ops_applied;  // semicolon-joined kind=param pairs actually drawn
};

// One stochastic pass over the op list (in order, independent draws).
// Identical rng state reproduces the identical output image.
ApplyResult apply_once(const Image& img, const AugmentationSpec& spec, Rng& rng);

struct AugmentedItem {
  std::string out_path;
  std::string source_id;
  int replica = 0;
  std::string ops_applied;
  std::string label;
};

struct AugmentedSet {
  std::vector<AugmentedItem> items;
};

// Materializes expansion_factor replicas per training image under
// out_dir/<source_id>_<replica>.png plus a lineage CSV. Replica streams are
// derived per (seed, source_id, replica) so generation order never changes
// the outputs.
AugmentedSet expand(const std::vector<std::string>& train_ids, const Manifest& manifest,
                    const AugmentationSpec& spec, uint64_t seed, const fs::path& out_dir);

void write_lineage_csv(const fs::path& path, const AugmentedSet& set);
AugmentedSet read_lineage_csv(const fs::path& path);

// Individual transforms (exposed for the per-pixel oracle tests).
Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image rotate_right_angle(const Image& img, int degrees);  // 90 | 180 | 270
Image rotate_small(const Image& img, double degrees);     // reflect-padded, same canvas
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image perspective_skew(const Image& img, const std::array<std::pair<double, double>, 4>& corner_shift);

}  // namespace lymebench
