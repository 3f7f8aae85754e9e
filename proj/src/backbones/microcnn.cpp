#include "builder.hpp"

namespace lymebench::backbones {

// Compact convnets for pipeline validation and desk-scale experiments. They
// run through exactly the same code paths as the large backbones but train
// in seconds on a CPU.
Model build_microcnn(const std::string& name) {
  int input = 0;
  if (name == "MicroCNN32") input = 32;
  else if (name == "MicroCNN64") input = 64;
  else fail("unknown MicroCNN variant: " + name);

  Gb g(input, input, PreprocessMode::ScaleTf, name);
  const int widths[3] = {8, 16, 32};
  for (int b = 0; b < 3; ++b) {
    const std::string id = "block" + std::to_string(b + 1);
    g.conv(id + "_conv", widths[b], 3, 1, Padding::Same, false);
    g.bn(id + "_bn", -1, 1e-3);
    g.relu(id + "_relu");
    if (b < 2) g.maxpool(id + "_pool", 2, 2, Padding::Valid);
  }
  return std::move(g.m);
}

}  // namespace lymebench::backbones
