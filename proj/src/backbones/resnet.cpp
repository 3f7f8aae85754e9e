#include "builder.hpp"

namespace lymebench::backbones {

namespace {

// v1 bottleneck: 1x1(s) -> 3x3 -> 1x1(4f), post-activation, conv shortcut on
// the first block of each stack.
int v1_block(Gb& g, int x, int f, int stride, bool conv_shortcut, const std::string& id) {
  int shortcut = x;
  if (conv_shortcut) {
    shortcut = g.conv(id + "_0_conv", 4 * f, 1, stride, Padding::Valid, true, x);
    shortcut = g.bn(id + "_0_bn", shortcut);
  }
  int y = g.conv(id + "_1_conv", f, 1, stride, Padding::Valid, true, x);
  y = g.bn(id + "_1_bn", y);
  y = g.relu(id + "_1_relu", y);
  y = g.conv(id + "_2_conv", f, 3, 1, Padding::Same, true, y);
  y = g.bn(id + "_2_bn", y);
  y = g.relu(id + "_2_relu", y);
  y = g.conv(id + "_3_conv", 4 * f, 1, 1, Padding::Valid, true, y);
  y = g.bn(id + "_3_bn", y);
  y = g.add(id + "_add", {shortcut, y});
  return g.relu(id + "_out", y);
}

// v2 bottleneck: shared pre-activation, stride on the last block of a stack.
int v2_block(Gb& g, int x, int f, int stride, bool conv_shortcut, const std::string& id) {
  int preact = g.bn(id + "_preact_bn", x);
  preact = g.relu(id + "_preact_relu", preact);
  int shortcut;
  if (conv_shortcut) {
    shortcut = g.conv(id + "_0_conv", 4 * f, 1, stride, Padding::Valid, true, preact);
  } else if (stride > 1) {
    shortcut = g.maxpool(id + "_0_pool", 1, stride, Padding::Valid, x);
  } else {
    shortcut = x;
  }
  int y = g.conv(id + "_1_conv", f, 1, 1, Padding::Valid, false, preact);
  y = g.bn(id + "_1_bn", y);
  y = g.relu(id + "_1_relu", y);
  y = g.conv(id + "_2_conv", f, 3, stride, Padding::Same, false, y);
  y = g.bn(id + "_2_bn", y);
  y = g.relu(id + "_2_relu", y);
  y = g.conv(id + "_3_conv", 4 * f, 1, 1, Padding::Valid, true, y);
  return g.add(id + "_out", {shortcut, y});
}

}  // namespace

Model build_resnet(const std::string& name) {
  const bool v2 = name.ends_with("V2");
  int depth = 0;
  if (name.starts_with("ResNet50")) depth = 50;
  else if (name.starts_with("ResNet101")) depth = 101;
  else fail("unknown ResNet variant: " + name);
  const int blocks_per_stack[4] = {3, depth == 50 ? 4 : 4, depth == 50 ? 6 : 23, 3};
  const int stack_filters[4] = {64, 128, 256, 512};

  Gb g(224, 224, v2 ? PreprocessMode::ScaleTf : PreprocessMode::CaffeBgr, name);
  g.zeropad("conv1_pad", 3, 3, 3, 3);
  g.conv("conv1_conv", 64, 7, 2, Padding::Valid, true);
  if (!v2) {
    g.bn("conv1_bn");
    g.relu("conv1_relu");
  }
  g.zeropad("pool1_pad", 1, 1, 1, 1);
  int x = g.maxpool("pool1_pool", 3, 2, Padding::Valid);

  for (int s = 0; s < 4; ++s) {
    const int f = stack_filters[s];
    const int blocks = blocks_per_stack[s];
    const std::string stack = "conv" + std::to_string(s + 2);
    if (!v2) {
      const int stride = s == 0 ? 1 : 2;
      x = v1_block(g, x, f, stride, true, stack + "_block1");
      for (int b = 2; b <= blocks; ++b)
        x = v1_block(g, x, f, 1, false, stack + "_block" + std::to_string(b));
    } else {
      x = v2_block(g, x, f, 1, true, stack + "_block1");
      for (int b = 2; b < blocks; ++b)
        x = v2_block(g, x, f, 1, false, stack + "_block" + std::to_string(b));
      const int stride = s == 3 ? 1 : 2;  // last stack keeps stride 1
      x = v2_block(g, x, f, stride, false, stack + "_block" + std::to_string(blocks));
    }
  }
  if (v2) {
    g.bn("post_bn", x);
    g.relu("post_relu");
  }
  return std::move(g.m);
}

}  // namespace lymebench::backbones
