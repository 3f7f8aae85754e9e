#include "builder.hpp"

namespace lymebench::backbones {

Model build_mobilenet_v2() {
  Gb g(224, 224, PreprocessMode::ScaleTf, "MobileNetV2");
  const double eps = 1e-3;

  g.conv("Conv1", 32, 3, 2, Padding::Same, false);
  g.bn("bn_Conv1", -1, eps);
  int x = g.act("Conv1_relu", Act::Relu6);

  struct Stage {
    int expand, out, repeats, stride;
  };
  const Stage stages[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                          {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
  int block_id = 0;
  for (const auto& st : stages) {
    for (int r = 0; r < st.repeats; ++r) {
      const std::string id = "block_" + std::to_string(block_id);
      const int in_c = g.channels(x);
      const int stride = r == 0 ? st.stride : 1;
      int y = x;
      if (block_id > 0) {  // the very first block has no expansion conv
        y = g.conv(id + "_expand", in_c * st.expand, 1, 1, Padding::Valid, false, x);
        y = g.bn(id + "_expand_BN", y, eps);
        y = g.act(id + "_expand_relu", Act::Relu6, y);
      }
      y = g.dwconv(id + "_depthwise", 3, stride, Padding::Same, false, y);
      y = g.bn(id + "_depthwise_BN", y, eps);
      y = g.act(id + "_depthwise_relu", Act::Relu6, y);
      y = g.conv(id + "_project", st.out, 1, 1, Padding::Valid, false, y);
      y = g.bn(id + "_project_BN", y, eps);
      if (stride == 1 && in_c == st.out) y = g.add(id + "_add", {x, y});
      x = y;
      ++block_id;
    }
  }
  g.conv("Conv_1", 1280, 1, 1, Padding::Valid, false, x);
  g.bn("Conv_1_bn", -1, eps);
  g.act("out_relu", Act::Relu6);
  return std::move(g.m);
}

namespace {

struct V3Block {
  double expansion;
  int filters;
  int kernel;
  int stride;
  bool se;
  Act activation;
};

int v3_se_block(Gb& g, int x, int expanded, const std::string& id) {
  const int se_filters = round_depth(double(expanded) * 0.25);
  int s = g.gap(id + "_se_gap", x);
  s = g.conv(id + "_se_reduce", se_filters, 1, 1, Padding::Valid, true, s);
  s = g.relu(id + "_se_relu", s);
  s = g.conv(id + "_se_expand", expanded, 1, 1, Padding::Valid, true, s);
  s = g.act(id + "_se_gate", Act::HardSigmoid, s);
  return g.mul(id + "_se_mul", x, s);
}

}  // namespace

Model build_mobilenet_v3(const std::string& name) {
  const bool small = name == "MobileNetV3Small";
  if (!small && name != "MobileNetV3Large") fail("unknown MobileNetV3 variant: " + name);
  const double eps = 1e-3;

  std::vector<V3Block> blocks;
  if (small) {
    blocks = {{1, 16, 3, 2, true, Act::Relu},
              {72.0 / 16, 24, 3, 2, false, Act::Relu},
              {88.0 / 24, 24, 3, 1, false, Act::Relu},
              {4, 40, 5, 2, true, Act::HardSwish},
              {6, 40, 5, 1, true, Act::HardSwish},
              {6, 40, 5, 1, true, Act::HardSwish},
              {3, 48, 5, 1, true, Act::HardSwish},
              {3, 48, 5, 1, true, Act::HardSwish},
              {6, 96, 5, 2, true, Act::HardSwish},
              {6, 96, 5, 1, true, Act::HardSwish},
              {6, 96, 5, 1, true, Act::HardSwish}};
  } else {
    blocks = {{1, 16, 3, 1, false, Act::Relu},
              {4, 24, 3, 2, false, Act::Relu},
              {3, 24, 3, 1, false, Act::Relu},
              {3, 40, 5, 2, true, Act::Relu},
              {3, 40, 5, 1, true, Act::Relu},
              {3, 40, 5, 1, true, Act::Relu},
              {6, 80, 3, 2, false, Act::HardSwish},
              {2.5, 80, 3, 1, false, Act::HardSwish},
              {2.3, 80, 3, 1, false, Act::HardSwish},
              {2.3, 80, 3, 1, false, Act::HardSwish},
              {6, 112, 3, 1, true, Act::HardSwish},
              {6, 112, 3, 1, true, Act::HardSwish},
              {6, 160, 5, 2, true, Act::HardSwish},
              {6, 160, 5, 1, true, Act::HardSwish},
              {6, 160, 5, 1, true, Act::HardSwish}};
  }

  Gb g(224, 224, PreprocessMode::ScaleTf, name);
  g.conv("Conv", 16, 3, 2, Padding::Same, false);
  g.bn("Conv/BatchNorm", -1, eps);
  int x = g.act("Conv_hswish", Act::HardSwish);

  for (size_t b = 0; b < blocks.size(); ++b) {
    const auto& cfg = blocks[b];
    const std::string id = "expanded_conv_" + std::to_string(b);
    const int in_c = g.channels(x);
    const int expanded = round_depth(double(in_c) * cfg.expansion);
    int y = x;
    if (b > 0) {  // block 0 skips the expansion conv
      y = g.conv(id + "/expand", expanded, 1, 1, Padding::Valid, false, x);
      y = g.bn(id + "/expand/BatchNorm", y, eps);
      y = g.act(id + "/expand/act", cfg.activation, y);
    }
    y = g.dwconv(id + "/depthwise", cfg.kernel, cfg.stride, Padding::Same, false, y);
    y = g.bn(id + "/depthwise/BatchNorm", y, eps);
    y = g.act(id + "/depthwise/act", cfg.activation, y);
    if (cfg.se) y = v3_se_block(g, y, g.channels(y), id);
    y = g.conv(id + "/project", cfg.filters, 1, 1, Padding::Valid, false, y);
    y = g.bn(id + "/project/BatchNorm", y, eps);
    if (cfg.stride == 1 && in_c == cfg.filters) y = g.add(id + "/Add", {x, y});
    x = y;
  }

  const int last_conv = round_depth(double(g.channels(x)) * 6.0);
  g.conv("Conv_1", last_conv, 1, 1, Padding::Valid, false, x);
  g.bn("Conv_1/BatchNorm", -1, eps);
  g.act("Conv_1_hswish", Act::HardSwish);
  // final pointwise expansion kept at full spatial resolution, matching the
  // published parameter/FLOP figures for these backbones
  g.conv("Conv_2", small ? 1024 : 1280, 1, 1, Padding::Valid, true);
  g.act("Conv_2_hswish", Act::HardSwish);
  return std::move(g.m);
}

}  // namespace lymebench::backbones
