#include "lymebench/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace lymebench::explain {

using nn::LayerKind;
using nn::Model;
using nn::Tensor;

int find_cam_target_node(const Model& model) {
  // per-backbone overrides (layer name of the target activation)
  static const std::map<std::string, std::string> overrides = {};
  auto it = overrides.find(model.backbone_name);
  if (it != overrides.end()) {
    const int node = model.find_layer(it->second);
    if (node < 0) fail("cam override names a missing layer: " + it->second);
    return node;
  }
  // auto-detect: input of the head GAP; otherwise the last spatial node
  if (model.head_start >= 0) {
    for (int i = model.head_start; i < int(model.layers.size()); ++i)
      if (model.layers[size_t(i)].kind == LayerKind::GlobalAvgPool)
        return model.layers[size_t(i)].inputs.at(0);
  }
  for (int i = int(model.layers.size()) - 1; i >= 0; --i) {
    const auto& out = model.layers[size_t(i)].out;
    if (out.h > 1 && out.w > 1) return i;
  }
  fail("model has no spatial activation to explain");
}

Heatmap grad_cam(Model& model, const std::vector<float>& image_rgb, int target_class) {
  if (target_class != 0 && target_class != 1) fail("grad_cam: target class must be 0 or 1");
  if (image_rgb.size() != model.input_shape.per_item())
    fail("grad_cam: image does not match the model input shape");
  const int out_node = model.output_node();
  if (model.layers[size_t(out_node)].kind != LayerKind::Activation ||
      model.layers[size_t(out_node)].act != nn::Act::Sigmoid)
    fail("grad_cam expects a sigmoid-headed binary model");
  const int logit_node = model.layers[size_t(out_node)].inputs.at(0);
  const int target = find_cam_target_node(model);

  Tensor input(1, model.input_shape.h, model.input_shape.w, model.input_shape.c);
  std::copy(image_rgb.begin(), image_rgb.end(), input.v.begin());

  Model::Workspace ws;
  model.forward(input, ws, /*training=*/false);

  // d(class score)/d(logit): +1 for the positive class, -1 for class 0
  // (1 - sigmoid falls monotonically in the logit)
  Tensor dseed(ws.act[size_t(logit_node)].shape);
  dseed.v[0] = target_class == 1 ? 1.0f : -1.0f;
  model.zero_grads();
  model.backward(ws, logit_node, dseed, target + 1);

  const Tensor& act = ws.act[size_t(target)];
  const Tensor& grad = ws.grad[size_t(target)];
  const int h = act.shape.h, w = act.shape.w, c = act.shape.c;

  // channel weights: spatial average of the gradient
  std::vector<double> alpha(size_t(c), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) alpha[size_t(ch)] += grad.at(0, y, x, ch);
  for (auto& a : alpha) a /= double(h) * w;

  Heatmap map;
  map.h = h;
  map.w = w;
  map.target_class = target_class;
  map.source_layer = model.layers[size_t(target)].name;
  map.grid.assign(size_t(h) * w, 0.0);
  double maxv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int ch = 0; ch < c; ++ch) v += alpha[size_t(ch)] * act.at(0, y, x, ch);
      v = std::max(0.0, v);  // rectification
      map.grid[size_t(y) * w + x] = v;
      maxv = std::max(maxv, v);
    }
  }
  if (maxv > 0.0)
    for (auto& v : map.grid) v /= maxv;
  return map;
}

namespace {

void jet_color(double v, uint8_t rgb[3]) {
  auto ramp = [](double x) { return std::clamp(x, 0.0, 1.0); };
  rgb[0] = uint8_t(255.0 * ramp(1.5 - std::abs(4.0 * v - 3.0)) + 0.5);
  rgb[1] = uint8_t(255.0 * ramp(1.5 - std::abs(4.0 * v - 2.0)) + 0.5);
  rgb[2] = uint8_t(255.0 * ramp(1.5 - std::abs(4.0 * v - 1.0)) + 0.5);
}

}  // namespace

Image overlay(const Heatmap& h, const Image& original) {
  if (h.grid.empty() || original.empty()) fail("overlay: empty inputs");
  constexpr double kAlpha = 0.4;
  Image out(original.width, original.height);
  const double sy = double(h.h) / original.height;
  const double sx = double(h.w) / original.width;
  for (int y = 0; y < original.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(h.h - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, h.h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < original.width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(h.w - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, h.w - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * h.at(y0, x0) + wx * h.at(y0, x1)) +
                       wy * ((1 - wx) * h.at(y1, x0) + wx * h.at(y1, x1));
      uint8_t rgb[3];
      jet_color(v, rgb);
      for (int c = 0; c < 3; ++c) {
        const double blended = (1.0 - kAlpha) * original.at(y, x, c) + kAlpha * rgb[c];
        out.at(y, x, c) = uint8_t(std::clamp(blended + 0.5, 0.0, 255.0));
      }
    }
  }
  return out;
}

void write_heatmap_csv(const fs::path& path, const Heatmap& h) {
  std::ostringstream out;
  for (int y = 0; y < h.h; ++y) {
    for (int x = 0; x < h.w; ++x) {
      if (x) out << ',';
      out << fmt_double(h.at(y, x), 6);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace lymebench::explain
