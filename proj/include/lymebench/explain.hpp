#pragma once

#include <string>
#include <vector>

#include "lymebench/common.hpp"
#include "lymebench/image.hpp"
#include "lymebench/nn/model.hpp"

namespace lymebench::explain {

struct Heatmap {
  int h = 0, w = 0;
  std::vector<double> grid;  // row-major, normalized to [0,1]
  int target_class = 1;
  std::string source_layer;  // the resolved final convolutional activation

  double at(int y, int x) const { return grid[size_t(y) * w + x]; }
};

// The activation the class-score gradient is pooled over: the input of the
// head's global average pooling, i.e. the last spatial activation. Backbones
// with a different ultimate-convolution convention can be pinned in the
// override table inside explain.cpp.
int find_cam_target_node(const nn::Model& model);

// Gradient-weighted class activation map. target_class 1 explains the
// positive (sigmoid) score, 0 explains its complement. The map is the
// rectified, gradient-weighted sum of the target activations, max-normalized.
Heatmap grad_cam(nn::Model& model, const std::vector<float>& image_rgb, int target_class);

// Heatmap bilinearly upsampled to the image size, color-mapped and
// alpha-blended at 0.4 over the original.
Image overlay(const Heatmap& h, const Image& original);

void write_heatmap_csv(const fs::path& path, const Heatmap& h);

}  // namespace lymebench::explain
