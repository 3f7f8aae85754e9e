#include "builder.hpp"

namespace lymebench::backbones {

namespace {

// SeparableConv2D (no bias) decomposed into depthwise + pointwise.
int sepconv(Gb& g, int x, int filters, int k, const std::string& id) {
  int y = g.dwconv(id + "_dw", k, 1, Padding::Same, false, x);
  return g.conv(id + "_pw", filters, 1, 1, Padding::Valid, false, y);
}

}  // namespace

Model build_xception() {
  Gb g(299, 299, PreprocessMode::ScaleTf, "Xception");

  g.conv("block1_conv1", 32, 3, 2, Padding::Valid, false);
  g.bn("block1_conv1_bn");
  g.relu("block1_conv1_act");
  g.conv("block1_conv2", 64, 3, 1, Padding::Valid, false);
  g.bn("block1_conv2_bn");
  int x = g.relu("block1_conv2_act");

  // entry flow reductions: 128, 256, 728
  const int entry_filters[3] = {128, 256, 728};
  for (int b = 0; b < 3; ++b) {
    const std::string id = "block" + std::to_string(b + 2);
    int residual = g.conv(id + "_res_conv", entry_filters[b], 1, 2, Padding::Same, false, x);
    residual = g.bn(id + "_res_bn", residual);
    int y = x;
    if (b > 0) y = g.relu(id + "_sepconv1_act", y);
    y = sepconv(g, y, entry_filters[b], 3, id + "_sepconv1");
    y = g.bn(id + "_sepconv1_bn", y);
    y = g.relu(id + "_sepconv2_act", y);
    y = sepconv(g, y, entry_filters[b], 3, id + "_sepconv2");
    y = g.bn(id + "_sepconv2_bn", y);
    y = g.maxpool(id + "_pool", 3, 2, Padding::Same, y);
    x = g.add(id + "_add", {y, residual});
  }

  // middle flow
  for (int b = 0; b < 8; ++b) {
    const std::string id = "block" + std::to_string(b + 5);
    int y = x;
    for (int s = 1; s <= 3; ++s) {
      y = g.relu(id + "_sepconv" + std::to_string(s) + "_act", y);
      y = sepconv(g, y, 728, 3, id + "_sepconv" + std::to_string(s));
      y = g.bn(id + "_sepconv" + std::to_string(s) + "_bn", y);
    }
    x = g.add(id + "_add", {y, x});
  }

  // exit flow
  {
    int residual = g.conv("block13_res_conv", 1024, 1, 2, Padding::Same, false, x);
    residual = g.bn("block13_res_bn", residual);
    int y = g.relu("block13_sepconv1_act", x);
    y = sepconv(g, y, 728, 3, "block13_sepconv1");
    y = g.bn("block13_sepconv1_bn", y);
    y = g.relu("block13_sepconv2_act", y);
    y = sepconv(g, y, 1024, 3, "block13_sepconv2");
    y = g.bn("block13_sepconv2_bn", y);
    y = g.maxpool("block13_pool", 3, 2, Padding::Same, y);
    x = g.add("block13_add", {y, residual});
  }
  x = sepconv(g, x, 1536, 3, "block14_sepconv1");
  x = g.bn("block14_sepconv1_bn", x);
  x = g.relu("block14_sepconv1_act", x);
  x = sepconv(g, x, 2048, 3, "block14_sepconv2");
  x = g.bn("block14_sepconv2_bn", x);
  g.relu("block14_sepconv2_act", x);
  return std::move(g.m);
}

}  // namespace lymebench::backbones
