#pragma once

// Shared fixtures for the unit suites: temp dirs, synthetic images and
// datasets, and a tiny trainable dataset factory.

#include <string>
#include <vector>

#include "lymebench/augment.hpp"
#include "lymebench/common.hpp"
#include "lymebench/image.hpp"
#include "lymebench/manifest.hpp"
#include "lymebench/nn/train.hpp"

namespace testutil {

using namespace lymebench;

inline fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("test_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline Image solid_image(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

// smooth two-axis gradient; halving it box-averages to the same dhash cells
inline Image gradient_image(int w, int h, int phase = 0) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = uint8_t((x * 255) / std::max(1, w - 1));
      img.at(y, x, 1) = uint8_t((y * 255) / std::max(1, h - 1));
      img.at(y, x, 2) = uint8_t(((x + y + phase) * 127) / std::max(1, w + h - 2));
    }
  return img;
}

inline Image noise_image(int w, int h, uint64_t seed) {
  Image img(w, h);
  Rng rng(seed);
  for (auto& px : img.px) px = uint8_t(rng.next_below(256));
  return img;
}

// Writes a two-class dataset of PNGs and returns its root:
// root/EM/em_<i>.png and root/Confuser/conf_<i>.png.
inline fs::path write_two_class_dataset(const std::string& name, int n_pos, int n_neg,
                                        int size = 24) {
  const fs::path root = fresh_dir(name);
  for (int i = 0; i < n_pos; ++i)
    save_png(root / "EM" / ("em_" + std::to_string(i) + ".png"),
             noise_image(size, size, 1000 + uint64_t(i)));
  for (int i = 0; i < n_neg; ++i)
    save_png(root / "Confuser" / ("conf_" + std::to_string(i) + ".png"),
             noise_image(size, size, 2000 + uint64_t(i)));
  return root;
}

// Synthetic shape images: a filled disc ("blob", positive class) or an
// annulus ("ring") at a random position over a noisy background. Returns the
// shape's bounding box through the out parameters when requested.
inline Image shape_image(int size, bool blob, uint64_t seed, int* bb_x0 = nullptr,
                         int* bb_y0 = nullptr, int* bb_x1 = nullptr, int* bb_y1 = nullptr) {
  Rng rng(seed);
  Image img(size, size);
  for (auto& px : img.px) px = uint8_t(20 + rng.next_below(40));  // dim noise background
  const int radius = size / 5 + int(rng.next_below(size_t(size / 8 + 1)));
  const int cx = radius + 1 + int(rng.next_below(size_t(std::max(1, size - 2 * radius - 2))));
  const int cy = radius + 1 + int(rng.next_below(size_t(std::max(1, size - 2 * radius - 2))));
  const double inner = blob ? 0.0 : radius * 0.55;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d = std::sqrt(double(x - cx) * (x - cx) + double(y - cy) * (y - cy));
      if (d <= radius && d >= inner) {
        img.at(y, x, 0) = uint8_t(200 + rng.next_below(56));
        img.at(y, x, 1) = uint8_t(60 + rng.next_below(40));
        img.at(y, x, 2) = uint8_t(60 + rng.next_below(40));
      }
    }
  }
  if (bb_x0) *bb_x0 = std::max(0, cx - radius);
  if (bb_y0) *bb_y0 = std::max(0, cy - radius);
  if (bb_x1) *bb_x1 = std::min(size - 1, cx + radius);
  if (bb_y1) *bb_y1 = std::min(size - 1, cy + radius);
  return img;
}

// blob-vs-ring dataset rooted at a temp dir (blob = EM = positive)
inline fs::path write_shape_dataset(const std::string& name, int per_class, int size) {
  const fs::path root = fresh_dir(name);
  for (int i = 0; i < per_class; ++i) {
    save_png(root / "EM" / ("blob_" + std::to_string(i) + ".png"),
             shape_image(size, true, 10000 + uint64_t(i)));
    save_png(root / "Confuser" / ("ring_" + std::to_string(i) + ".png"),
             shape_image(size, false, 20000 + uint64_t(i)));
  }
  return root;
}

inline nn::LabeledImageSet shape_set(int per_class, int size, uint64_t seed) {
  nn::LabeledImageSet set;
  set.height = size;
  set.width = size;
  for (int i = 0; i < per_class; ++i) {
    for (int cls = 0; cls < 2; ++cls) {
      const Image img = shape_image(size, cls == 1, seed + uint64_t(i * 2 + cls) * 977);
      std::vector<float> flat(img.px.size());
      for (size_t k = 0; k < flat.size(); ++k) flat[k] = float(img.px[k]);
      set.push(std::move(flat), cls);
    }
  }
  return set;
}

}  // namespace testutil
