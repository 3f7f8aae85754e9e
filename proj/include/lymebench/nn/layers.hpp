#pragma once

#include <array>
#include <string>
#include <vector>

#include "lymebench/nn/tensor.hpp"

namespace lymebench::nn {

enum class LayerKind {
  Input,
  Preprocess,      // canonical input normalization of the backbone's recipe
  Conv2D,
  DepthwiseConv2D,
  Dense,
  BatchNorm,
  Activation,
  MaxPool,
  AvgPool,
  GlobalAvgPool,
  Add,             // optional fixed per-input coefficients (scaled residuals)
  Multiply,        // broadcast over spatial dims when one side is [n,1,1,c]
  Concat,          // channel axis
  ZeroPad,
  Crop,
  Dropout,
};

enum class Act { Linear, Relu, Relu6, Sigmoid, Softmax, Swish, HardSwish, HardSigmoid };

enum class Padding { Same, Valid };

// Input normalization recipes used by the pretrained backbones.
enum class PreprocessMode {
  None,      // raw [0,255]
  ScaleTf,   // x/127.5 - 1
  CaffeBgr,  // BGR reorder, per-channel ImageNet mean subtraction
  Torch,     // x/255 then per-channel ImageNet mean/std
};

const char* layer_kind_name(LayerKind k);
const char* act_name(Act a);

// One graph node. Weight layout follows the channels-last convention:
//   Conv2D           weights[0] = [kh, kw, cin, cout] (+ [1,1,1,cout] bias)
//   DepthwiseConv2D  weights[0] = [kh, kw, c, 1]      (+ bias)
//   Dense            weights[0] = [1, 1, cin, cout]   (+ bias)
//   BatchNorm        weights = {gamma, beta, moving_mean, moving_var}, each [1,1,1,c]
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::Input;
  std::vector<int> inputs;

  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  Padding padding = Padding::Same;
  int filters = 0;
  bool use_bias = true;
  Act act = Act::Linear;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  double rate = 0.0;  // dropout
  int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;  // ZeroPad adds, Crop removes
  PreprocessMode preprocess = PreprocessMode::None;
  std::vector<float> add_coeffs;  // Add: per-input scale, defaults to 1

  Shape out;  // per-item shape (n == 1), fixed at graph build time
  std::vector<Tensor> weights;
  bool trainable = true;

  bool has_weights() const { return !weights.empty(); }
  // gamma/beta for BN, kernel/bias otherwise; moving stats are never optimized
  int optimizable_weight_count() const;
  long long param_count() const;
};

// Shape inference for a node given its input shapes (n fixed to 1).
Shape infer_shape(const Layer& layer, const std::vector<Shape>& in);

// TF-style 'same' padding split for one axis; extra cell goes to the end.
void same_padding(int in, int kernel, int stride, int* before, int* after);
int conv_out_dim(int in, int kernel, int stride, Padding p);

// ---------------------------------------------------------------------------
// Forward / backward kernels. All take pre-shaped output tensors.
// `aux` carries dropout masks and similar per-call state between passes.
// ---------------------------------------------------------------------------
struct LayerCtx {
  bool training = false;
  Rng* rng = nullptr;        // dropout draws
  Tensor* aux = nullptr;     // per-node scratch owned by the workspace
  bool update_bn_stats = true;
};

void layer_forward(Layer& layer, const std::vector<const Tensor*>& in, Tensor& out,
                   const LayerCtx& ctx);

// dOut is the gradient w.r.t. this node's output; the kernel accumulates into
// dIn (already zero-initialized by the caller) and the layer's weight_grads.
void layer_backward(Layer& layer, const std::vector<const Tensor*>& in, const Tensor& out,
                    const Tensor& dout, const std::vector<Tensor*>& din,
                    std::vector<Tensor>& weight_grads, const LayerCtx& ctx);

}  // namespace lymebench::nn
