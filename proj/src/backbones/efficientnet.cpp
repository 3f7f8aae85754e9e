#include "builder.hpp"

#include <cmath>

namespace lymebench::backbones {

namespace {

struct ScaledVariant {
  double width, depth;
  int resolution;
};

struct BlockArgs {
  int kernel, repeats, filters_in, filters_out, expand, stride;
};

const BlockArgs kBaseBlocks[] = {
    {3, 1, 32, 16, 1, 1},  {3, 2, 16, 24, 6, 2},  {5, 2, 24, 40, 6, 2},
    {3, 3, 40, 80, 6, 2},  {5, 3, 80, 112, 6, 1}, {5, 4, 112, 192, 6, 2},
    {3, 1, 192, 320, 6, 1}};

int round_filters(double filters, double width) {
  return round_depth(filters * width, 8);
}

int round_repeats(int repeats, double depth) {
  return int(std::ceil(depth * double(repeats)));
}

}  // namespace

Model build_efficientnet(const std::string& name) {
  ScaledVariant v;
  if (name == "EfficientNetB0") v = {1.0, 1.0, 224};
  else if (name == "EfficientNetB1") v = {1.0, 1.1, 240};
  else if (name == "EfficientNetB2") v = {1.1, 1.2, 260};
  else if (name == "EfficientNetB3") v = {1.2, 1.4, 300};
  else if (name == "EfficientNetB4") v = {1.4, 1.8, 380};
  else if (name == "EfficientNetB5") v = {1.6, 2.2, 456};
  else fail("unknown EfficientNet variant: " + name);
  const double eps = 1e-3;
  const double se_ratio = 0.25;

  Gb g(v.resolution, v.resolution, PreprocessMode::Torch, name);
  g.conv("stem_conv", round_filters(32, v.width), 3, 2, Padding::Same, false);
  g.bn("stem_bn", -1, eps);
  int x = g.act("stem_activation", Act::Swish);

  int block_idx = 0;
  for (size_t s = 0; s < std::size(kBaseBlocks); ++s) {
    const BlockArgs& base = kBaseBlocks[s];
    const int filters_in = round_filters(base.filters_in, v.width);
    const int filters_out = round_filters(base.filters_out, v.width);
    const int repeats = round_repeats(base.repeats, v.depth);
    for (int r = 0; r < repeats; ++r) {
      const std::string id = "block" + std::to_string(s + 1) + std::string(1, char('a' + r));
      const int in_c = r == 0 ? filters_in : filters_out;
      const int stride = r == 0 ? base.stride : 1;
      const int expanded = in_c * base.expand;
      int y = x;
      if (base.expand != 1) {
        y = g.conv(id + "_expand_conv", expanded, 1, 1, Padding::Valid, false, x);
        y = g.bn(id + "_expand_bn", y, eps);
        y = g.act(id + "_expand_activation", Act::Swish, y);
      }
      y = g.dwconv(id + "_dwconv", base.kernel, stride, Padding::Same, false, y);
      y = g.bn(id + "_bn", y, eps);
      y = g.act(id + "_activation", Act::Swish, y);
      // squeeze-excite on the expanded representation
      {
        const int se_filters = std::max(1, int(double(in_c) * se_ratio));
        int se = g.gap(id + "_se_squeeze", y);
        se = g.conv(id + "_se_reduce", se_filters, 1, 1, Padding::Valid, true, se);
        se = g.act(id + "_se_reduce_act", Act::Swish, se);
        se = g.conv(id + "_se_expand", expanded, 1, 1, Padding::Valid, true, se);
        se = g.act(id + "_se_gate", Act::Sigmoid, se);
        y = g.mul(id + "_se_excite", y, se);
      }
      y = g.conv(id + "_project_conv", filters_out, 1, 1, Padding::Valid, false, y);
      y = g.bn(id + "_project_bn", y, eps);
      if (stride == 1 && in_c == filters_out) y = g.add(id + "_add", {x, y});
      x = y;
      ++block_idx;
    }
  }
  (void)block_idx;

  g.conv("top_conv", round_filters(1280, v.width), 1, 1, Padding::Valid, false, x);
  g.bn("top_bn", -1, eps);
  g.act("top_activation", Act::Swish);
  return std::move(g.m);
}

}  // namespace lymebench::backbones
