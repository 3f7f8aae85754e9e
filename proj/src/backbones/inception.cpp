#include "builder.hpp"

namespace lymebench::backbones {

namespace {

int cbr(Gb& g, int x, int f, int kh, int kw, int sh, int sw, Padding p, const std::string& id) {
  int y = g.conv(id + "_conv", f, kh, kw, sh, sw, p, false, x);
  y = g.bn(id + "_bn", y, 1e-3);
  return g.relu(id + "_relu", y);
}

}  // namespace

Model build_inception_v3() {
  // 224x224 input (the complexity table's convention for this benchmark)
  Gb g(224, 224, PreprocessMode::ScaleTf, "InceptionV3");

  int x = cbr(g, g.last, 32, 3, 3, 2, 2, Padding::Valid, "conv1a");
  x = cbr(g, x, 32, 3, 3, 1, 1, Padding::Valid, "conv2a");
  x = cbr(g, x, 64, 3, 3, 1, 1, Padding::Same, "conv2b");
  x = g.maxpool("pool1", 3, 2, Padding::Valid, x);
  x = cbr(g, x, 80, 1, 1, 1, 1, Padding::Valid, "conv3b");
  x = cbr(g, x, 192, 3, 3, 1, 1, Padding::Valid, "conv4a");
  x = g.maxpool("pool2", 3, 2, Padding::Valid, x);

  // mixed 0..2: 35x35 modules
  for (int mix = 0; mix < 3; ++mix) {
    const std::string id = "mixed" + std::to_string(mix);
    const int pool_proj = mix == 0 ? 32 : 64;
    int b0 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 48, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    b1 = cbr(g, b1, 64, 5, 5, 1, 1, Padding::Same, id + "_b1b");
    int b2 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, 96, 3, 3, 1, 1, Padding::Same, id + "_b2b");
    b2 = cbr(g, b2, 96, 3, 3, 1, 1, Padding::Same, id + "_b2c");
    int b3 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b3 = cbr(g, b3, pool_proj, 1, 1, 1, 1, Padding::Same, id + "_b3");
    x = g.concat(id, {b0, b1, b2, b3});
  }

  // mixed3: reduction to 17x17
  {
    int b0 = cbr(g, x, 384, 3, 3, 2, 2, Padding::Valid, "mixed3_b0");
    int b1 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, "mixed3_b1a");
    b1 = cbr(g, b1, 96, 3, 3, 1, 1, Padding::Same, "mixed3_b1b");
    b1 = cbr(g, b1, 96, 3, 3, 2, 2, Padding::Valid, "mixed3_b1c");
    int b2 = g.maxpool("mixed3_pool", 3, 2, Padding::Valid, x);
    x = g.concat("mixed3", {b0, b1, b2});
  }

  // mixed 4..7: 17x17 factorized 7x7 modules
  for (int mix = 4; mix < 8; ++mix) {
    const std::string id = "mixed" + std::to_string(mix);
    const int mid = mix == 4 ? 128 : (mix == 7 ? 192 : 160);
    int b0 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, mid, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    b1 = cbr(g, b1, mid, 1, 7, 1, 1, Padding::Same, id + "_b1b");
    b1 = cbr(g, b1, 192, 7, 1, 1, 1, Padding::Same, id + "_b1c");
    int b2 = cbr(g, x, mid, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, mid, 7, 1, 1, 1, Padding::Same, id + "_b2b");
    b2 = cbr(g, b2, mid, 1, 7, 1, 1, Padding::Same, id + "_b2c");
    b2 = cbr(g, b2, mid, 7, 1, 1, 1, Padding::Same, id + "_b2d");
    b2 = cbr(g, b2, 192, 1, 7, 1, 1, Padding::Same, id + "_b2e");
    int b3 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b3 = cbr(g, b3, 192, 1, 1, 1, 1, Padding::Same, id + "_b3");
    x = g.concat(id, {b0, b1, b2, b3});
  }

  // mixed8: reduction to 8x8
  {
    int b0 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, "mixed8_b0a");
    b0 = cbr(g, b0, 320, 3, 3, 2, 2, Padding::Valid, "mixed8_b0b");
    int b1 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, "mixed8_b1a");
    b1 = cbr(g, b1, 192, 1, 7, 1, 1, Padding::Same, "mixed8_b1b");
    b1 = cbr(g, b1, 192, 7, 1, 1, 1, Padding::Same, "mixed8_b1c");
    b1 = cbr(g, b1, 192, 3, 3, 2, 2, Padding::Valid, "mixed8_b1d");
    int b2 = g.maxpool("mixed8_pool", 3, 2, Padding::Valid, x);
    x = g.concat("mixed8", {b0, b1, b2});
  }

  // mixed 9..10: 8x8 expanded modules
  for (int mix = 9; mix <= 10; ++mix) {
    const std::string id = "mixed" + std::to_string(mix);
    int b0 = cbr(g, x, 320, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 384, 1, 1, 1, 1, Padding::Same, id + "_b1a");
    int b1a = cbr(g, b1, 384, 1, 3, 1, 1, Padding::Same, id + "_b1b");
    int b1b = cbr(g, b1, 384, 3, 1, 1, 1, Padding::Same, id + "_b1c");
    int b1c = g.concat(id + "_b1", {b1a, b1b});
    int b2 = cbr(g, x, 448, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, 384, 3, 3, 1, 1, Padding::Same, id + "_b2b");
    int b2a = cbr(g, b2, 384, 1, 3, 1, 1, Padding::Same, id + "_b2c");
    int b2b = cbr(g, b2, 384, 3, 1, 1, 1, Padding::Same, id + "_b2d");
    int b2c = g.concat(id + "_b2", {b2a, b2b});
    int b3 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b3 = cbr(g, b3, 192, 1, 1, 1, 1, Padding::Same, id + "_b3");
    x = g.concat(id, {b0, b1c, b2c, b3});
  }
  return std::move(g.m);
}

}  // namespace lymebench::backbones
