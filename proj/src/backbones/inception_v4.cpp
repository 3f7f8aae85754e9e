#include "builder.hpp"

namespace lymebench::backbones {

namespace {

int cbr(Gb& g, int x, int f, int kh, int kw, int sh, int sw, Padding p, const std::string& id) {
  int y = g.conv(id + "_conv", f, kh, kw, sh, sw, p, false, x);
  y = g.bn(id + "_bn", y, 1e-3);
  return g.relu(id + "_relu", y);
}

}  // namespace

Model build_inception_v4() {
  Gb g(299, 299, PreprocessMode::ScaleTf, "InceptionV4");

  // stem
  int x = cbr(g, g.last, 32, 3, 3, 2, 2, Padding::Valid, "stem1");
  x = cbr(g, x, 32, 3, 3, 1, 1, Padding::Valid, "stem2");
  x = cbr(g, x, 64, 3, 3, 1, 1, Padding::Same, "stem3");
  {
    int p = g.maxpool("stem4_pool", 3, 2, Padding::Valid, x);
    int c = cbr(g, x, 96, 3, 3, 2, 2, Padding::Valid, "stem4_conv");
    x = g.concat("stem4", {p, c});
  }
  {
    int a = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, "stem5a1");
    a = cbr(g, a, 96, 3, 3, 1, 1, Padding::Valid, "stem5a2");
    int b = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, "stem5b1");
    b = cbr(g, b, 64, 1, 7, 1, 1, Padding::Same, "stem5b2");
    b = cbr(g, b, 64, 7, 1, 1, 1, Padding::Same, "stem5b3");
    b = cbr(g, b, 96, 3, 3, 1, 1, Padding::Valid, "stem5b4");
    x = g.concat("stem5", {a, b});
  }
  {
    int c = cbr(g, x, 192, 3, 3, 2, 2, Padding::Valid, "stem6_conv");
    int p = g.maxpool("stem6_pool", 3, 2, Padding::Valid, x);
    x = g.concat("stem6", {c, p});
  }

  // 4x Inception-A
  for (int i = 0; i < 4; ++i) {
    const std::string id = "inceptionA" + std::to_string(i);
    int b0 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b0 = cbr(g, b0, 96, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 96, 1, 1, 1, 1, Padding::Same, id + "_b1");
    int b2 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, 96, 3, 3, 1, 1, Padding::Same, id + "_b2b");
    int b3 = cbr(g, x, 64, 1, 1, 1, 1, Padding::Same, id + "_b3a");
    b3 = cbr(g, b3, 96, 3, 3, 1, 1, Padding::Same, id + "_b3b");
    b3 = cbr(g, b3, 96, 3, 3, 1, 1, Padding::Same, id + "_b3c");
    x = g.concat(id, {b0, b1, b2, b3});
  }
  // Reduction-A
  {
    int b0 = g.maxpool("reductionA_pool", 3, 2, Padding::Valid, x);
    int b1 = cbr(g, x, 384, 3, 3, 2, 2, Padding::Valid, "reductionA_b1");
    int b2 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, "reductionA_b2a");
    b2 = cbr(g, b2, 224, 3, 3, 1, 1, Padding::Same, "reductionA_b2b");
    b2 = cbr(g, b2, 256, 3, 3, 2, 2, Padding::Valid, "reductionA_b2c");
    x = g.concat("reductionA", {b0, b1, b2});
  }
  // 7x Inception-B
  for (int i = 0; i < 7; ++i) {
    const std::string id = "inceptionB" + std::to_string(i);
    int b0 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b0 = cbr(g, b0, 128, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 384, 1, 1, 1, 1, Padding::Same, id + "_b1");
    int b2 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b2a");
    b2 = cbr(g, b2, 224, 1, 7, 1, 1, Padding::Same, id + "_b2b");
    b2 = cbr(g, b2, 256, 7, 1, 1, 1, Padding::Same, id + "_b2c");
    int b3 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, id + "_b3a");
    b3 = cbr(g, b3, 192, 1, 7, 1, 1, Padding::Same, id + "_b3b");
    b3 = cbr(g, b3, 224, 7, 1, 1, 1, Padding::Same, id + "_b3c");
    b3 = cbr(g, b3, 224, 1, 7, 1, 1, Padding::Same, id + "_b3d");
    b3 = cbr(g, b3, 256, 7, 1, 1, 1, Padding::Same, id + "_b3e");
    x = g.concat(id, {b0, b1, b2, b3});
  }
  // Reduction-B
  {
    int b0 = g.maxpool("reductionB_pool", 3, 2, Padding::Valid, x);
    int b1 = cbr(g, x, 192, 1, 1, 1, 1, Padding::Same, "reductionB_b1a");
    b1 = cbr(g, b1, 192, 3, 3, 2, 2, Padding::Valid, "reductionB_b1b");
    int b2 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, "reductionB_b2a");
    b2 = cbr(g, b2, 256, 1, 7, 1, 1, Padding::Same, "reductionB_b2b");
    b2 = cbr(g, b2, 320, 7, 1, 1, 1, Padding::Same, "reductionB_b2c");
    b2 = cbr(g, b2, 320, 3, 3, 2, 2, Padding::Valid, "reductionB_b2d");
    x = g.concat("reductionB", {b0, b1, b2});
  }
  // 3x Inception-C
  for (int i = 0; i < 3; ++i) {
    const std::string id = "inceptionC" + std::to_string(i);
    int b0 = g.avgpool(id + "_pool", 3, 1, Padding::Same, x);
    b0 = cbr(g, b0, 256, 1, 1, 1, 1, Padding::Same, id + "_b0");
    int b1 = cbr(g, x, 256, 1, 1, 1, 1, Padding::Same, id + "_b1");
    int b2 = cbr(g, x, 384, 1, 1, 1, 1, Padding::Same, id + "_b2");
    int b2a = cbr(g, b2, 256, 1, 3, 1, 1, Padding::Same, id + "_b2a");
    int b2b = cbr(g, b2, 256, 3, 1, 1, 1, Padding::Same, id + "_b2b");
    int b3 = cbr(g, x, 384, 1, 1, 1, 1, Padding::Same, id + "_b3a");
    b3 = cbr(g, b3, 448, 1, 3, 1, 1, Padding::Same, id + "_b3b");
    b3 = cbr(g, b3, 512, 3, 1, 1, 1, Padding::Same, id + "_b3c");
    int b3a = cbr(g, b3, 256, 3, 1, 1, 1, Padding::Same, id + "_b3d");
    int b3b = cbr(g, b3, 256, 1, 3, 1, 1, Padding::Same, id + "_b3e");
    x = g.concat(id, {b0, b1, b2a, b2b, b3a, b3b});
  }
  return std::move(g.m);
}

}  // namespace lymebench::backbones
