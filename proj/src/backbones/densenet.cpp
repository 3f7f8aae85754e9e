#include "builder.hpp"

namespace lymebench::backbones {

Model build_densenet(const std::string& name) {
  std::vector<int> blocks;
  if (name == "DenseNet121") blocks = {6, 12, 24, 16};
  else if (name == "DenseNet169") blocks = {6, 12, 32, 32};
  else if (name == "DenseNet201") blocks = {6, 12, 48, 32};
  else fail("unknown DenseNet variant: " + name);
  const int growth = 32;

  Gb g(224, 224, PreprocessMode::Torch, name);
  g.zeropad("zero_padding", 3, 3, 3, 3);
  g.conv("conv1/conv", 64, 7, 2, Padding::Valid, false);
  g.bn("conv1/bn");
  g.relu("conv1/relu");
  g.zeropad("pool1_pad", 1, 1, 1, 1);
  int x = g.maxpool("pool1", 3, 2, Padding::Valid);

  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string block = "conv" + std::to_string(b + 2);
    for (int i = 1; i <= blocks[b]; ++i) {
      const std::string id = block + "_block" + std::to_string(i);
      int y = g.bn(id + "_0_bn", x);
      y = g.relu(id + "_0_relu", y);
      y = g.conv(id + "_1_conv", 4 * growth, 1, 1, Padding::Valid, false, y);
      y = g.bn(id + "_1_bn", y);
      y = g.relu(id + "_1_relu", y);
      y = g.conv(id + "_2_conv", growth, 3, 1, Padding::Same, false, y);
      x = g.concat(id + "_concat", {x, y});
    }
    if (b + 1 < blocks.size()) {
      const std::string id = "pool" + std::to_string(b + 2);
      int y = g.bn(id + "_bn", x);
      y = g.relu(id + "_relu", y);
      y = g.conv(id + "_conv", g.m.layers[size_t(y)].out.c / 2, 1, 1, Padding::Valid, false, y);
      x = g.avgpool(id + "_pool", 2, 2, Padding::Valid, y);
    }
  }
  g.bn("bn", x);
  g.relu("relu");
  return std::move(g.m);
}

}  // namespace lymebench::backbones
