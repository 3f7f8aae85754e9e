#include "builder.hpp"

namespace lymebench::backbones {

namespace {

int cbr(Gb& g, int x, int f, int kh, int kw, int sh, int sw, Padding p, const std::string& id,
        bool activation = true) {
  int y = g.conv(id + "_conv", f, kh, kw, sh, sw, p, false, x);
  y = g.bn(id + "_bn", y, 1e-3);
  if (activation) y = g.relu(id + "_relu", y);
  return y;
}

}  // namespace

Model build_inception_resnet_v2() {
  Gb g(299, 299, PreprocessMode::ScaleTf, "InceptionResNetV2");

  int x = cbr(g, g.last, 32, 3, 3, 2, 2, Padding::Valid, "stem1");
  x = cbr(g, x, 32, 3, 3, 1, 1, Padding::Valid, "stem2");
  x = cbr(g, x, 64, 3, 3, 1, 1, Padding::Same, "stem3");
  x = g.maxpool("stem_pool1", 3, 2, Padding::Valid, x);
  x = cbr(g, x, 80, 1, 1, 1, 1, Padding::Valid, "stem4");
  x = cbr(g, x, 192, 3, 3, 1, 1, Padding::Valid, "stem5");
  x = g.maxpool("stem_pool2", 3, 2, Padding::Valid, x);

  // mixed_5b
  {
    int b0 = cbr(g, x, 96, 1, 1, 1, 1, Padding::Same, "mixed5b_b0");
    int b1 = cbr(g, x, 48, 1, 1, 1, 1, Padding::Same, "mixed5b_b1a");
    b1 = cbr(g, b1, 64, 5, 5, 1, 1, Padding::Same, "mixed5b_b1b");
    int b2 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, "mixed5b_b2a");
    b2 = cbr(g, b2, 96, 3, 3, 1, 1, Padding::Same, "mixed5b_b2b");
    b2 = cbr(g, b2, 96, 3, 3, 1, 1, Padding::Same, "mixed5b_b2c");
    int b3 = g.avgpool("mixed5b_pool", 3, 1, Padding::Same, x);
    b3 = cbr(g, b3, 64, 1, 1, 1, 1, Padding::Same, "mixed5b_b3");
    x = g.concat("mixed5b", {b0, b1, b2, b3});
  }

  // 10x block35, scale 0.17
  for (int i = 1; i <= 10; ++i) {
    const std::string id = "block35_" + std::to_string(i);
    int b0 = cbr(g, x, 32, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 32, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    b1 = cbr(g, b1, 32, 3, 3, 1, 1, Padding::Same, id + "_b1b");
    int b2 = cbr(g, x, 32, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, 48, 3, 3, 1, 1, Padding::Same, id + "_b2b");
    b2 = cbr(g, b2, 64, 3, 3, 1, 1, Padding::Same, id + "_b2c");
    int mixed = g.concat(id + "_mixed", {b0, b1, b2});
    int up = g.conv(id + "_up", 320, 1, 1, 1, 1, Padding::Same, true, mixed);
    x = g.add(id + "_add", {x, up}, {1.0f, 0.17f});
    x = g.relu(id + "_ac", x);
  }

  // mixed_6a reduction
  {
    int b0 = cbr(g, x, 384, 3, 3, 2, 2, Padding::Valid, "mixed6a_b0");
    int b1 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, "mixed6a_b1a");
    b1 = cbr(g, b1, 256, 3, 3, 1, 1, Padding::Same, "mixed6a_b1b");
    b1 = cbr(g, b1, 384, 3, 3, 2, 2, Padding::Valid, "mixed6a_b1c");
    int b2 = g.maxpool("mixed6a_pool", 3, 2, Padding::Valid, x);
    x = g.concat("mixed6a", {b0, b1, b2});
  }

  // 20x block17, scale 0.1
  for (int i = 1; i <= 20; ++i) {
    const std::string id = "block17_" + std::to_string(i);
    int b0 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 128, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    b1 = cbr(g, b1, 160, 1, 7, 1, 1, Padding::Same, id + "_b1b");
    b1 = cbr(g, b1, 192, 7, 1, 1, 1, Padding::Same, id + "_b1c");
    int mixed = g.concat(id + "_mixed", {b0, b1});
    int up = g.conv(id + "_up", 1088, 1, 1, 1, 1, Padding::Same, true, mixed);
    x = g.add(id + "_add", {x, up}, {1.0f, 0.1f});
    x = g.relu(id + "_ac", x);
  }

  // mixed_7a reduction
  {
    int b0 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, "mixed7a_b0a");
    b0 = cbr(g, b0, 384, 3, 3, 2, 2, Padding::Valid, "mixed7a_b0b");
    int b1 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, "mixed7a_b1a");
    b1 = cbr(g, b1, 288, 3, 3, 2, 2, Padding::Valid, "mixed7a_b1b");
    int b2 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, "mixed7a_b2a");
    b2 = cbr(g, b2, 288, 3, 3, 1, 1, Padding::Same, "mixed7a_b2b");
    b2 = cbr(g, b2, 320, 3, 3, 2, 2, Padding::Valid, "mixed7a_b2c");
    int b3 = g.maxpool("mixed7a_pool", 3, 2, Padding::Valid, x);
    x = g.concat("mixed7a", {b0, b1, b2, b3});
  }

  // 9x block8 scale 0.2 + final block8 scale 1 without activation
  for (int i = 1; i <= 10; ++i) {
    const std::string id = "block8_" + std::to_string(i);
    const bool last = i == 10;
    int b0 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    b1 = cbr(g, b1, 224, 1, 3, 1, 1, Padding::Same, id + "_b1b");
    b1 = cbr(g, b1, 256, 3, 1, 1, 1, Padding::Same, id + "_b1c");
    int mixed = g.concat(id + "_mixed", {b0, b1});
    int up = g.conv(id + "_up", 2080, 1, 1, 1, 1, Padding::Same, true, mixed);
    x = g.add(id + "_add", {x, up}, {1.0f, last ? 1.0f : 0.2f});
    if (!last) x = g.relu(id + "_ac", x);
  }

  cbr(g, x, 1536, 1, 1, 1, 1, Padding::Same, "conv_7b");
  return std::move(g.m);
}

}  // namespace lymebench::backbones
