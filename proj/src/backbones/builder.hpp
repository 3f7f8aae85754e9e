#pragma once

// Internal graph-construction helper shared by the backbone sources.

#include <string>

#include "lymebench/nn/model.hpp"

namespace lymebench::backbones {

using nn::Act;
using nn::Layer;
using nn::LayerKind;
using nn::Model;
using nn::Padding;
using nn::PreprocessMode;

struct Gb {
  Model m;
  int last = -1;

  explicit Gb(int h, int w, PreprocessMode mode, const std::string& name) {
    m.backbone_name = name;
    m.input_shape = {1, h, w, 3};
    Layer in;
    in.kind = LayerKind::Input;
    in.name = "input";
    last = m.add_layer(in);
    Layer pre;
    pre.kind = LayerKind::Preprocess;
    pre.name = "preprocess";
    pre.preprocess = mode;
    pre.inputs = {last};
    last = m.add_layer(pre);
  }

  int node(int from) const { return from < 0 ? last : from; }

  int conv(const std::string& name, int filters, int kh, int kw, int sh, int sw, Padding p,
           bool bias, int from = -1) {
    Layer l;
    l.kind = LayerKind::Conv2D;
    l.name = name;
    l.filters = filters;
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.stride_h = sh;
    l.stride_w = sw;
    l.padding = p;
    l.use_bias = bias;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int conv(const std::string& name, int filters, int k, int s, Padding p, bool bias,
           int from = -1) {
    return conv(name, filters, k, k, s, s, p, bias, from);
  }

  int dwconv(const std::string& name, int k, int s, Padding p, bool bias, int from = -1) {
    Layer l;
    l.kind = LayerKind::DepthwiseConv2D;
    l.name = name;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.padding = p;
    l.use_bias = bias;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int bn(const std::string& name, int from = -1, double eps = 1.001e-5) {
    Layer l;
    l.kind = LayerKind::BatchNorm;
    l.name = name;
    l.bn_epsilon = eps;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int act(const std::string& name, Act a, int from = -1) {
    Layer l;
    l.kind = LayerKind::Activation;
    l.name = name;
    l.act = a;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int relu(const std::string& name, int from = -1) { return act(name, Act::Relu, from); }

  int maxpool(const std::string& name, int k, int s, Padding p, int from = -1) {
    Layer l;
    l.kind = LayerKind::MaxPool;
    l.name = name;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.padding = p;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int avgpool(const std::string& name, int k, int s, Padding p, int from = -1) {
    Layer l;
    l.kind = LayerKind::AvgPool;
    l.name = name;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.padding = p;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int gap(const std::string& name, int from = -1) {
    Layer l;
    l.kind = LayerKind::GlobalAvgPool;
    l.name = name;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int add(const std::string& name, std::vector<int> srcs, std::vector<float> coeffs = {}) {
    Layer l;
    l.kind = LayerKind::Add;
    l.name = name;
    l.inputs = std::move(srcs);
    l.add_coeffs = std::move(coeffs);
    return last = m.add_layer(std::move(l));
  }

  int mul(const std::string& name, int a, int b) {
    Layer l;
    l.kind = LayerKind::Multiply;
    l.name = name;
    l.inputs = {a, b};
    return last = m.add_layer(std::move(l));
  }

  int concat(const std::string& name, std::vector<int> srcs) {
    Layer l;
    l.kind = LayerKind::Concat;
    l.name = name;
    l.inputs = std::move(srcs);
    return last = m.add_layer(std::move(l));
  }

  int zeropad(const std::string& name, int t, int b, int lft, int r, int from = -1) {
    Layer l;
    l.kind = LayerKind::ZeroPad;
    l.name = name;
    l.pad_t = t;
    l.pad_b = b;
    l.pad_l = lft;
    l.pad_r = r;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int crop(const std::string& name, int t, int b, int lft, int r, int from = -1) {
    Layer l;
    l.kind = LayerKind::Crop;
    l.name = name;
    l.pad_t = t;
    l.pad_b = b;
    l.pad_l = lft;
    l.pad_r = r;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int dense(const std::string& name, int units, bool bias = true, int from = -1) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.name = name;
    l.filters = units;
    l.use_bias = bias;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  int dropout(const std::string& name, double rate, int from = -1) {
    Layer l;
    l.kind = LayerKind::Dropout;
    l.name = name;
    l.rate = rate;
    l.inputs = {node(from)};
    return last = m.add_layer(std::move(l));
  }

  // conv + bn + activation, the ubiquitous trio
  int cba(const std::string& name, int filters, int kh, int kw, int sh, int sw, Padding p,
          Act a, int from = -1, double eps = 1.001e-5) {
    conv(name + "_conv", filters, kh, kw, sh, sw, p, /*bias=*/false, from);
    bn(name + "_bn", -1, eps);
    return act(name + "_act", a);
  }

  int channels(int node_idx = -1) const { return m.layers[size_t(node(node_idx))].out.c; }
};

// Keras-style width rounding used by the mobile families.
inline int round_depth(double v, int divisor = 8, int min_value = -1) {
  if (min_value < 0) min_value = divisor;
  int new_v = std::max(min_value, (int(v + double(divisor) / 2) / divisor) * divisor);
  if (double(new_v) < 0.9 * v) new_v += divisor;
  return new_v;
}

Model build_vgg(const std::string& name);
Model build_resnet(const std::string& name);
Model build_inception_v3();
Model build_inception_v4();
Model build_inception_resnet_v2();
Model build_xception();
Model build_densenet(const std::string& name);
Model build_mobilenet_v2();
Model build_mobilenet_v3(const std::string& name);
Model build_nasnet_mobile();
Model build_efficientnet(const std::string& name);
Model build_microcnn(const std::string& name);

}  // namespace lymebench::backbones
