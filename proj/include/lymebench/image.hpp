#pragma once

#include <cstdint>
#include <vector>

#include "lymebench/common.hpp"

namespace lymebench {

// 8-bit RGB raster, row-major interleaved. All pipeline stages that touch
// pixels (augmentation, hashing, model input) start from this type so that
// materialized artifacts are byte-reproducible.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> px;  // height * width * 3

  Image() = default;
  Image(int w, int h, uint8_t fill = 0) : width(w), height(h), px(size_t(w) * h * 3, fill) {}

  uint8_t& at(int y, int x, int c) { return px[(size_t(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const { return px[(size_t(y) * width + x) * 3 + c]; }
  bool empty() const { return px.empty(); }
};

// Decoders dispatch on magic bytes (PNG, JPEG, PPM/PGM binary). Throws Error
// on anything undecodable.
Image load_image(const fs::path& path);
bool looks_like_image(const fs::path& path);  // extension pre-filter

void save_png(const fs::path& path, const Image& img);
void save_ppm(const fs::path& path, const Image& img);

Image resize_bilinear(const Image& img, int out_w, int out_h);

// Mean-of-box grayscale downsample (BT.601 luma). Stable under integer
// downscaling, which is what the duplicate detector relies on.
std::vector<double> box_downsample_gray(const Image& img, int out_w, int out_h);

// 64-bit difference hash: 8-row x 9-column grayscale downsample, one bit per
// horizontally adjacent pair (left brighter than right).
uint64_t dhash64(const Image& img);

int hamming64(uint64_t a, uint64_t b);

std::string phash_to_hex(uint64_t h);
uint64_t phash_from_hex(const std::string& s);

}  // namespace lymebench
