#include "builder.hpp"

namespace lymebench::backbones {

Model build_vgg(const std::string& name) {
  const bool is19 = name == "VGG19";
  if (!is19 && name != "VGG16") fail("unknown VGG variant: " + name);
  const int convs_per_block[5] = {2, 2, is19 ? 4 : 3, is19 ? 4 : 3, is19 ? 4 : 3};
  const int filters[5] = {64, 128, 256, 512, 512};

  Gb g(224, 224, PreprocessMode::CaffeBgr, name);
  for (int b = 0; b < 5; ++b) {
    for (int c = 0; c < convs_per_block[b]; ++c) {
      const std::string id = "block" + std::to_string(b + 1) + "_conv" + std::to_string(c + 1);
      g.conv(id, filters[b], 3, 1, Padding::Same, /*bias=*/true);
      g.relu(id + "_relu");
    }
    g.maxpool("block" + std::to_string(b + 1) + "_pool", 2, 2, Padding::Valid);
  }
  return std::move(g.m);
}

}  // namespace lymebench::backbones
