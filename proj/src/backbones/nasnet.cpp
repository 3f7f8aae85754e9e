#include "builder.hpp"

namespace lymebench::backbones {

namespace {

constexpr double kBnEps = 1e-3;
constexpr double kBnMom = 0.9997;

int bn(Gb& g, int x, const std::string& id) {
  int y = g.bn(id, x, kBnEps);
  g.m.layers[size_t(y)].bn_momentum = kBnMom;
  return y;
}

// relu -> separable(k, stride) -> bn -> relu -> separable(k, 1) -> bn
int sep_block(Gb& g, int x, int filters, int k, int stride, const std::string& id) {
  int y = g.relu(id + "_relu1", x);
  y = g.dwconv(id + "_sep1_dw", k, stride, Padding::Same, false, y);
  y = g.conv(id + "_sep1_pw", filters, 1, 1, Padding::Valid, false, y);
  y = bn(g, y, id + "_sep1_bn");
  y = g.relu(id + "_relu2", y);
  y = g.dwconv(id + "_sep2_dw", k, 1, Padding::Same, false, y);
  y = g.conv(id + "_sep2_pw", filters, 1, 1, Padding::Valid, false, y);
  return bn(g, y, id + "_sep2_bn");
}

// Match the skip input's spatial/channel shape to the current input.
int adjust(Gb& g, int p, int ip, int filters, const std::string& id) {
  if (p < 0) return ip;
  const auto& ps = g.m.layers[size_t(p)].out;
  const auto& is = g.m.layers[size_t(ip)].out;
  if (ps.h != is.h) {
    int r = g.relu(id + "_adjust_relu", p);
    int p1 = g.avgpool(id + "_adjust_avg1", 1, 2, Padding::Valid, r);
    p1 = g.conv(id + "_adjust_conv1", filters / 2, 1, 1, Padding::Valid, false, p1);
    int p2 = g.zeropad(id + "_adjust_pad", 0, 1, 0, 1, r);
    p2 = g.crop(id + "_adjust_crop", 1, 0, 1, 0, p2);
    p2 = g.avgpool(id + "_adjust_avg2", 1, 2, Padding::Valid, p2);
    p2 = g.conv(id + "_adjust_conv2", filters / 2, 1, 1, Padding::Valid, false, p2);
    int c = g.concat(id + "_adjust_concat", {p1, p2});
    return bn(g, c, id + "_adjust_bn");
  }
  if (ps.c != filters) {
    int r = g.relu(id + "_adjust_relu", p);
    int c = g.conv(id + "_adjust_proj", filters, 1, 1, Padding::Valid, false, r);
    return bn(g, c, id + "_adjust_bn");
  }
  return p;
}

// returns {cell output, cell input} — the input becomes the next cell's skip
std::pair<int, int> normal_cell(Gb& g, int ip, int p, int filters, const std::string& id) {
  p = adjust(g, p, ip, filters, id);
  int h = g.relu(id + "_conv1_relu", ip);
  h = g.conv(id + "_conv1", filters, 1, 1, Padding::Valid, false, h);
  h = bn(g, h, id + "_conv1_bn");

  int x1 = g.add(id + "_add1", {sep_block(g, h, filters, 5, 1, id + "_left1"),
                                sep_block(g, p, filters, 3, 1, id + "_right1")});
  int x2 = g.add(id + "_add2", {sep_block(g, p, filters, 5, 1, id + "_left2"),
                                sep_block(g, p, filters, 3, 1, id + "_right2")});
  int x3 = g.add(id + "_add3", {g.avgpool(id + "_left3", 3, 1, Padding::Same, h), p});
  int x4 = g.add(id + "_add4", {g.avgpool(id + "_left4", 3, 1, Padding::Same, p),
                                g.avgpool(id + "_right4", 3, 1, Padding::Same, p)});
  int x5 = g.add(id + "_add5", {sep_block(g, h, filters, 3, 1, id + "_left5"), h});
  int out = g.concat(id + "_concat", {p, x1, x2, x3, x4, x5});
  return {out, ip};
}

std::pair<int, int> reduction_cell(Gb& g, int ip, int p, int filters, const std::string& id) {
  p = adjust(g, p, ip, filters, id);
  int h = g.relu(id + "_conv1_relu", ip);
  h = g.conv(id + "_conv1", filters, 1, 1, Padding::Valid, false, h);
  h = bn(g, h, id + "_conv1_bn");

  int x1 = g.add(id + "_add1", {sep_block(g, h, filters, 5, 2, id + "_left1"),
                                sep_block(g, p, filters, 7, 2, id + "_right1")});
  int x2 = g.add(id + "_add2", {g.maxpool(id + "_left2", 3, 2, Padding::Same, h),
                                sep_block(g, p, filters, 7, 2, id + "_right2")});
  int x3 = g.add(id + "_add3", {g.avgpool(id + "_left3", 3, 2, Padding::Same, h),
                                sep_block(g, p, filters, 5, 2, id + "_right3")});
  int x4 = g.add(id + "_add4", {x2, g.avgpool(id + "_left4", 3, 1, Padding::Same, x1)});
  int x5 = g.add(id + "_add5", {sep_block(g, x1, filters, 3, 1, id + "_left5"),
                                g.maxpool(id + "_right5", 3, 2, Padding::Same, h)});
  int out = g.concat(id + "_concat", {x2, x3, x4, x5});
  return {out, ip};
}

}  // namespace

Model build_nasnet_mobile() {
  const int filters = 1056 / 24;  // 44
  const int num_blocks = 4;

  Gb g(224, 224, PreprocessMode::ScaleTf, "NASNetMobile");
  g.conv("stem_conv1", 32, 3, 2, Padding::Valid, false);
  int x = bn(g, g.last, "stem_bn1");

  int p = -1;
  std::tie(x, p) = reduction_cell(g, x, p, filters / 4, "stem1");
  std::tie(x, p) = reduction_cell(g, x, p, filters / 2, "stem2");

  for (int i = 0; i < num_blocks; ++i)
    std::tie(x, p) = normal_cell(g, x, p, filters, "normal" + std::to_string(i));

  std::tie(x, p) = reduction_cell(g, x, p, filters * 2, "reduce4");
  for (int i = 0; i < num_blocks; ++i)
    std::tie(x, p) = normal_cell(g, x, p, filters * 2, "normal" + std::to_string(4 + i));

  std::tie(x, p) = reduction_cell(g, x, p, filters * 4, "reduce8");
  for (int i = 0; i < num_blocks; ++i)
    std::tie(x, p) = normal_cell(g, x, p, filters * 4, "normal" + std::to_string(8 + i));

  g.relu("final_relu", x);
  return std::move(g.m);
}

}  // namespace lymebench::backbones
