#include "lymebench/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace lymebench::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Preprocess: return "preprocess";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::DepthwiseConv2D: return "depthwise_conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::BatchNorm: return "batch_norm";
    case LayerKind::Activation: return "activation";
    case LayerKind::MaxPool: return "max_pool";
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::Add: return "add";
    case LayerKind::Multiply: return "multiply";
    case LayerKind::Concat: return "concat";
    case LayerKind::ZeroPad: return "zero_pad";
    case LayerKind::Crop: return "crop";
    case LayerKind::Dropout: return "dropout";
  }
  return "?";
}

const char* act_name(Act a) {
  switch (a) {
    case Act::Linear: return "linear";
    case Act::Relu: return "relu";
    case Act::Relu6: return "relu6";
    case Act::Sigmoid: return "sigmoid";
    case Act::Softmax: return "softmax";
    case Act::Swish: return "swish";
    case Act::HardSwish: return "hard_swish";
    case Act::HardSigmoid: return "hard_sigmoid";
  }
  return "?";
}

int Layer::optimizable_weight_count() const {
  if (kind == LayerKind::BatchNorm) return 2;  // gamma, beta
  return int(weights.size());
}

long long Layer::param_count() const {
  long long n = 0;
  for (const auto& w : weights) n += (long long)w.size();
  return n;
}

void same_padding(int in, int kernel, int stride, int* before, int* after) {
  const int out = (in + stride - 1) / stride;
  const int total = std::max(0, (out - 1) * stride + kernel - in);
  *before = total / 2;
  *after = total - *before;
}

int conv_out_dim(int in, int kernel, int stride, Padding p) {
  if (p == Padding::Same) return (in + stride - 1) / stride;
  return (in - kernel) / stride + 1;
}

Shape infer_shape(const Layer& layer, const std::vector<Shape>& in) {
  switch (layer.kind) {
    case LayerKind::Input:
      return layer.out;  // fixed by the builder
    case LayerKind::Preprocess:
    case LayerKind::BatchNorm:
    case LayerKind::Activation:
    case LayerKind::Dropout:
      return in.at(0);
    case LayerKind::Conv2D: {
      Shape s = in.at(0);
      return {1, conv_out_dim(s.h, layer.kernel_h, layer.stride_h, layer.padding),
              conv_out_dim(s.w, layer.kernel_w, layer.stride_w, layer.padding), layer.filters};
    }
    case LayerKind::DepthwiseConv2D: {
      Shape s = in.at(0);
      return {1, conv_out_dim(s.h, layer.kernel_h, layer.stride_h, layer.padding),
              conv_out_dim(s.w, layer.kernel_w, layer.stride_w, layer.padding), s.c};
    }
    case LayerKind::Dense: {
      Shape s = in.at(0);
      if (s.h != 1 || s.w != 1) fail("dense layer expects a flat input");
      return {1, 1, 1, layer.filters};
    }
    case LayerKind::MaxPool:
    case LayerKind::AvgPool: {
      Shape s = in.at(0);
      return {1, conv_out_dim(s.h, layer.kernel_h, layer.stride_h, layer.padding),
              conv_out_dim(s.w, layer.kernel_w, layer.stride_w, layer.padding), s.c};
    }
    case LayerKind::GlobalAvgPool: {
      Shape s = in.at(0);
      return {1, 1, 1, s.c};
    }
    case LayerKind::Add:
    case LayerKind::Multiply: {
      Shape a = in.at(0), b = in.at(1);
      if (a.count() >= b.count()) return a;
      return b;
    }
    case LayerKind::Concat: {
      Shape s = in.at(0);
      int c = 0;
      for (const auto& i : in) {
        if (i.h != s.h || i.w != s.w) fail("concat inputs must share spatial dims");
        c += i.c;
      }
      s.c = c;
      return s;
    }
    case LayerKind::ZeroPad: {
      Shape s = in.at(0);
      s.h += layer.pad_t + layer.pad_b;
      s.w += layer.pad_l + layer.pad_r;
      return s;
    }
    case LayerKind::Crop: {
      Shape s = in.at(0);
      s.h -= layer.pad_t + layer.pad_b;
      s.w -= layer.pad_l + layer.pad_r;
      if (s.h <= 0 || s.w <= 0) fail("crop removes the whole extent");
      return s;
    }
  }
  fail("infer_shape: unhandled layer kind");
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------
namespace {

void im2col(const Tensor& in, int kh, int kw, int sh, int sw, int pt, int pl, int oh, int ow,
            int item, RowMat& col) {
  const int ih = in.shape.h, iw = in.shape.w, c = in.shape.c;
  col.setZero(oh * ow, kh * kw * c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      float* row = col.data() + (size_t(oy) * ow + ox) * col.cols();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sh + ky - pt;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sw + kx - pl;
          if (ix < 0 || ix >= iw) continue;
          const float* src = &in.v[((size_t(item) * ih + iy) * iw + ix) * c];
          std::copy(src, src + c, row + (size_t(ky) * kw + kx) * c);
        }
      }
    }
  }
}

void col2im_add(const RowMat& col, int kh, int kw, int sh, int sw, int pt, int pl, int oh,
                int ow, int item, Tensor& din) {
  const int ih = din.shape.h, iw = din.shape.w, c = din.shape.c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const float* row = col.data() + (size_t(oy) * ow + ox) * col.cols();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sh + ky - pt;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sw + kx - pl;
          if (ix < 0 || ix >= iw) continue;
          float* dst = &din.v[((size_t(item) * ih + iy) * iw + ix) * c];
          const float* src = row + (size_t(ky) * kw + kx) * c;
          for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }
}

inline float act_apply(Act a, float x) {
  switch (a) {
    case Act::Linear: return x;
    case Act::Relu: return x > 0 ? x : 0;
    case Act::Relu6: return std::clamp(x, 0.0f, 6.0f);
    case Act::Sigmoid: return 1.0f / (1.0f + std::exp(-x));
    case Act::Swish: return x / (1.0f + std::exp(-x));
    case Act::HardSwish: return x * std::clamp(x + 3.0f, 0.0f, 6.0f) / 6.0f;
    case Act::HardSigmoid: return std::clamp(x + 3.0f, 0.0f, 6.0f) / 6.0f;
    case Act::Softmax: fail("softmax handled separately");
  }
  return x;
}

inline float act_grad(Act a, float x) {
  switch (a) {
    case Act::Linear: return 1.0f;
    case Act::Relu: return x > 0 ? 1.0f : 0.0f;
    case Act::Relu6: return (x > 0 && x < 6.0f) ? 1.0f : 0.0f;
    case Act::Sigmoid: {
      const float s = 1.0f / (1.0f + std::exp(-x));
      return s * (1.0f - s);
    }
    case Act::Swish: {
      const float s = 1.0f / (1.0f + std::exp(-x));
      return s + x * s * (1.0f - s);
    }
    case Act::HardSwish:
      if (x <= -3.0f) return 0.0f;
      if (x >= 3.0f) return 1.0f;
      return (2.0f * x + 3.0f) / 6.0f;
    case Act::HardSigmoid: return (x > -3.0f && x < 3.0f) ? 1.0f / 6.0f : 0.0f;
    case Act::Softmax: fail("softmax handled separately");
  }
  return 1.0f;
}

void pool_pads(const Layer& l, const Shape& in, int* pt, int* pl) {
  *pt = *pl = 0;
  if (l.padding == Padding::Same) {
    int pb, pr;
    same_padding(in.h, l.kernel_h, l.stride_h, pt, &pb);
    same_padding(in.w, l.kernel_w, l.stride_w, pl, &pr);
  }
}

}  // namespace

void layer_forward(Layer& layer, const std::vector<const Tensor*>& in, Tensor& out,
                   const LayerCtx& ctx) {
  switch (layer.kind) {
    case LayerKind::Input:
      out = *in.at(0);
      return;

    case LayerKind::Preprocess: {
      const Tensor& x = *in[0];
      out = x;
      const size_t pixels = x.size() / 3;
      switch (layer.preprocess) {
        case PreprocessMode::None:
          return;
        case PreprocessMode::ScaleTf:
          for (auto& v : out.v) v = v / 127.5f - 1.0f;
          return;
        case PreprocessMode::CaffeBgr: {
          static const float mean[3] = {103.939f, 116.779f, 123.68f};
          for (size_t p = 0; p < pixels; ++p) {
            const float r = x.v[3 * p], g = x.v[3 * p + 1], b = x.v[3 * p + 2];
            out.v[3 * p] = b - mean[0];
            out.v[3 * p + 1] = g - mean[1];
            out.v[3 * p + 2] = r - mean[2];
          }
          return;
        }
        case PreprocessMode::Torch: {
          static const float mean[3] = {0.485f, 0.456f, 0.406f};
          static const float stdev[3] = {0.229f, 0.224f, 0.225f};
          for (size_t p = 0; p < pixels; ++p)
            for (int c = 0; c < 3; ++c)
              out.v[3 * p + c] = (x.v[3 * p + c] / 255.0f - mean[c]) / stdev[c];
          return;
        }
      }
      return;
    }

    case LayerKind::Conv2D: {
      const Tensor& x = *in[0];
      const int kh = layer.kernel_h, kw = layer.kernel_w;
      int pt = 0, pb = 0, pl = 0, pr = 0;
      if (layer.padding == Padding::Same) {
        same_padding(x.shape.h, kh, layer.stride_h, &pt, &pb);
        same_padding(x.shape.w, kw, layer.stride_w, &pl, &pr);
      }
      const int oh = out.shape.h, ow = out.shape.w, co = out.shape.c;
      ConstMapMat ker(layer.weights[0].v.data(), kh * kw * x.shape.c, co);
      RowMat col;
      for (int item = 0; item < x.shape.n; ++item) {
        im2col(x, kh, kw, layer.stride_h, layer.stride_w, pt, pl, oh, ow, item, col);
        MapMat dst(out.v.data() + size_t(item) * out.shape.per_item(), oh * ow, co);
        dst.noalias() = col * ker;
        if (layer.use_bias) {
          ConstMapMat bias(layer.weights[1].v.data(), 1, co);
          dst.rowwise() += bias.row(0);
        }
      }
      return;
    }

    case LayerKind::DepthwiseConv2D: {
      const Tensor& x = *in[0];
      const int kh = layer.kernel_h, kw = layer.kernel_w, c = x.shape.c;
      int pt = 0, pb = 0, pl = 0, pr = 0;
      if (layer.padding == Padding::Same) {
        same_padding(x.shape.h, kh, layer.stride_h, &pt, &pb);
        same_padding(x.shape.w, kw, layer.stride_w, &pl, &pr);
      }
      const int oh = out.shape.h, ow = out.shape.w;
      const float* K = layer.weights[0].v.data();  // [kh][kw][c]
      for (int item = 0; item < x.shape.n; ++item) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            float* dst = &out.v[((size_t(item) * oh + oy) * ow + ox) * c];
            std::fill(dst, dst + c, 0.0f);
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * layer.stride_h + ky - pt;
              if (iy < 0 || iy >= x.shape.h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * layer.stride_w + kx - pl;
                if (ix < 0 || ix >= x.shape.w) continue;
                const float* src = &x.v[((size_t(item) * x.shape.h + iy) * x.shape.w + ix) * c];
                const float* kk = K + (size_t(ky) * kw + kx) * c;
                for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci] * kk[ci];
              }
            }
            if (layer.use_bias) {
              const float* bias = layer.weights[1].v.data();
              for (int ci = 0; ci < c; ++ci) dst[ci] += bias[ci];
            }
          }
        }
      }
      return;
    }

    case LayerKind::Dense: {
      const Tensor& x = *in[0];
      const int ci = x.shape.c, co = out.shape.c;
      ConstMapMat xin(x.v.data(), x.shape.n, ci);
      ConstMapMat ker(layer.weights[0].v.data(), ci, co);
      MapMat dst(out.v.data(), x.shape.n, co);
      dst.noalias() = xin * ker;
      if (layer.use_bias) {
        ConstMapMat bias(layer.weights[1].v.data(), 1, co);
        dst.rowwise() += bias.row(0);
      }
      return;
    }

    case LayerKind::BatchNorm: {
      const Tensor& x = *in[0];
      const int c = x.shape.c;
      const size_t m = x.size() / size_t(c);
      const float eps = float(layer.bn_epsilon);
      float* gamma = layer.weights[0].v.data();
      float* beta = layer.weights[1].v.data();
      float* mmean = layer.weights[2].v.data();
      float* mvar = layer.weights[3].v.data();

      const bool batch_mode = ctx.training && layer.trainable;
      std::vector<float> mu(size_t(c), 0.0f), var(size_t(c), 0.0f);
      if (batch_mode) {
        std::fill(mu.begin(), mu.end(), 0.0f);
        std::fill(var.begin(), var.end(), 0.0f);
        for (size_t i = 0; i < m; ++i)
          for (int ch = 0; ch < c; ++ch) mu[size_t(ch)] += x.v[i * c + ch];
        for (int ch = 0; ch < c; ++ch) mu[size_t(ch)] /= float(m);
        for (size_t i = 0; i < m; ++i)
          for (int ch = 0; ch < c; ++ch) {
            const float d = x.v[i * c + ch] - mu[size_t(ch)];
            var[size_t(ch)] += d * d;
          }
        for (int ch = 0; ch < c; ++ch) var[size_t(ch)] /= float(m);
        if (ctx.update_bn_stats) {
          const float mom = float(layer.bn_momentum);
          for (int ch = 0; ch < c; ++ch) {
            mmean[ch] = mmean[ch] * mom + mu[size_t(ch)] * (1.0f - mom);
            mvar[ch] = mvar[ch] * mom + var[size_t(ch)] * (1.0f - mom);
          }
        }
      } else {
        for (int ch = 0; ch < c; ++ch) {
          mu[size_t(ch)] = mmean[ch];
          var[size_t(ch)] = mvar[ch];
        }
      }
      std::vector<float> scale(size_t(c), 0.0f), shift(size_t(c), 0.0f);
      for (int ch = 0; ch < c; ++ch) {
        scale[size_t(ch)] = gamma[ch] / std::sqrt(var[size_t(ch)] + eps);
        shift[size_t(ch)] = beta[ch] - scale[size_t(ch)] * mu[size_t(ch)];
      }
      for (size_t i = 0; i < m; ++i)
        for (int ch = 0; ch < c; ++ch)
          out.v[i * c + ch] = x.v[i * c + ch] * scale[size_t(ch)] + shift[size_t(ch)];
      return;
    }

    case LayerKind::Activation: {
      const Tensor& x = *in[0];
      if (layer.act == Act::Softmax) {
        const int c = x.shape.c;
        const size_t m = x.size() / size_t(c);
        for (size_t i = 0; i < m; ++i) {
          const float* src = &x.v[i * c];
          float* dst = &out.v[i * c];
          float mx = src[0];
          for (int ch = 1; ch < c; ++ch) mx = std::max(mx, src[ch]);
          float sum = 0.0f;
          for (int ch = 0; ch < c; ++ch) {
            dst[ch] = std::exp(src[ch] - mx);
            sum += dst[ch];
          }
          for (int ch = 0; ch < c; ++ch) dst[ch] /= sum;
        }
      } else {
        for (size_t i = 0; i < x.size(); ++i) out.v[i] = act_apply(layer.act, x.v[i]);
      }
      return;
    }

    case LayerKind::MaxPool:
    case LayerKind::AvgPool: {
      const Tensor& x = *in[0];
      int pt, pl;
      pool_pads(layer, x.shape, &pt, &pl);
      const int oh = out.shape.h, ow = out.shape.w, c = x.shape.c;
      const bool is_max = layer.kind == LayerKind::MaxPool;
      for (int item = 0; item < x.shape.n; ++item) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
              float best = -std::numeric_limits<float>::infinity();
              float sum = 0.0f;
              int cnt = 0;
              for (int ky = 0; ky < layer.kernel_h; ++ky) {
                const int iy = oy * layer.stride_h + ky - pt;
                if (iy < 0 || iy >= x.shape.h) continue;
                for (int kx = 0; kx < layer.kernel_w; ++kx) {
                  const int ix = ox * layer.stride_w + kx - pl;
                  if (ix < 0 || ix >= x.shape.w) continue;
                  const float v = x.at(item, iy, ix, ch);
                  best = std::max(best, v);
                  sum += v;
                  ++cnt;
                }
              }
              out.at(item, oy, ox, ch) = is_max ? best : (cnt > 0 ? sum / float(cnt) : 0.0f);
            }
          }
        }
      }
      return;
    }

    case LayerKind::GlobalAvgPool: {
      const Tensor& x = *in[0];
      const int c = x.shape.c;
      const size_t hw = size_t(x.shape.h) * x.shape.w;
      for (int item = 0; item < x.shape.n; ++item) {
        float* dst = &out.v[size_t(item) * c];
        std::fill(dst, dst + c, 0.0f);
        const float* src = &x.v[size_t(item) * hw * c];
        for (size_t i = 0; i < hw; ++i)
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[i * c + ch];
        for (int ch = 0; ch < c; ++ch) dst[ch] /= float(hw);
      }
      return;
    }

    case LayerKind::Add: {
      auto coeff = [&](size_t k) {
        return k < layer.add_coeffs.size() ? layer.add_coeffs[k] : 1.0f;
      };
      out.zero();
      for (size_t k = 0; k < in.size(); ++k) {
        const float ck = coeff(k);
        for (size_t i = 0; i < out.size(); ++i) out.v[i] += ck * in[k]->v[i];
      }
      return;
    }

    case LayerKind::Multiply: {
      const Tensor* big = in[0];
      const Tensor* small = in[1];
      if (big->size() < small->size()) std::swap(big, small);
      if (big->size() == small->size()) {
        for (size_t i = 0; i < out.size(); ++i) out.v[i] = big->v[i] * small->v[i];
        return;
      }
      // broadcast [n,1,1,c] over [n,h,w,c]
      const int c = big->shape.c;
      const size_t hw = size_t(big->shape.h) * big->shape.w;
      for (int item = 0; item < big->shape.n; ++item) {
        const float* s = &small->v[size_t(item) * c];
        const float* b = &big->v[size_t(item) * hw * c];
        float* dst = &out.v[size_t(item) * hw * c];
        for (size_t i = 0; i < hw; ++i)
          for (int ch = 0; ch < c; ++ch) dst[i * c + ch] = b[i * c + ch] * s[ch];
      }
      return;
    }

    case LayerKind::Concat: {
      const int oc = out.shape.c;
      const size_t positions = size_t(out.shape.n) * out.shape.h * out.shape.w;
      int offset = 0;
      for (const Tensor* t : in) {
        const int c = t->shape.c;
        for (size_t i = 0; i < positions; ++i)
          std::copy(&t->v[i * c], &t->v[i * c] + c, &out.v[i * oc + offset]);
        offset += c;
      }
      return;
    }

    case LayerKind::ZeroPad: {
      const Tensor& x = *in[0];
      out.zero();
      const int c = x.shape.c;
      for (int item = 0; item < x.shape.n; ++item)
        for (int y = 0; y < x.shape.h; ++y)
          for (int xx = 0; xx < x.shape.w; ++xx)
            std::copy(&x.v[((size_t(item) * x.shape.h + y) * x.shape.w + xx) * c],
                      &x.v[((size_t(item) * x.shape.h + y) * x.shape.w + xx) * c] + c,
                      &out.v[((size_t(item) * out.shape.h + y + layer.pad_t) * out.shape.w +
                              xx + layer.pad_l) * c]);
      return;
    }

    case LayerKind::Crop: {
      const Tensor& x = *in[0];
      const int c = x.shape.c;
      for (int item = 0; item < x.shape.n; ++item)
        for (int y = 0; y < out.shape.h; ++y)
          for (int xx = 0; xx < out.shape.w; ++xx)
            for (int ch = 0; ch < c; ++ch)
              out.at(item, y, xx, ch) = x.at(item, y + layer.pad_t, xx + layer.pad_l, ch);
      return;
    }

    case LayerKind::Dropout: {
      const Tensor& x = *in[0];
      if (!ctx.training || layer.rate <= 0.0) {
        out = x;
        return;
      }
      if (!ctx.rng || !ctx.aux) fail("dropout in training mode needs an rng and aux buffer");
      Tensor& mask = *ctx.aux;
      mask = Tensor(x.shape);
      const float scale = 1.0f / float(1.0 - layer.rate);
      for (size_t i = 0; i < x.size(); ++i)
        mask.v[i] = ctx.rng->next_double() < layer.rate ? 0.0f : scale;
      for (size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * mask.v[i];
      return;
    }
  }
  fail("layer_forward: unhandled layer kind");
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------
void layer_backward(Layer& layer, const std::vector<const Tensor*>& in, const Tensor& out,
                    const Tensor& dout, const std::vector<Tensor*>& din,
                    std::vector<Tensor>& weight_grads, const LayerCtx& ctx) {
  switch (layer.kind) {
    case LayerKind::Input:
      if (!din.empty() && din[0]) {
        for (size_t i = 0; i < dout.size(); ++i) din[0]->v[i] += dout.v[i];
      }
      return;

    case LayerKind::Preprocess: {
      if (din.empty() || !din[0]) return;
      Tensor& dx = *din[0];
      const size_t pixels = dout.size() / 3;
      switch (layer.preprocess) {
        case PreprocessMode::None:
          for (size_t i = 0; i < dout.size(); ++i) dx.v[i] += dout.v[i];
          return;
        case PreprocessMode::ScaleTf:
          for (size_t i = 0; i < dout.size(); ++i) dx.v[i] += dout.v[i] / 127.5f;
          return;
        case PreprocessMode::CaffeBgr:
          for (size_t p = 0; p < pixels; ++p) {
            dx.v[3 * p + 2] += dout.v[3 * p];
            dx.v[3 * p + 1] += dout.v[3 * p + 1];
            dx.v[3 * p] += dout.v[3 * p + 2];
          }
          return;
        case PreprocessMode::Torch: {
          static const float stdev[3] = {0.229f, 0.224f, 0.225f};
          for (size_t p = 0; p < pixels; ++p)
            for (int c = 0; c < 3; ++c) dx.v[3 * p + c] += dout.v[3 * p + c] / (255.0f * stdev[c]);
          return;
        }
      }
      return;
    }

    case LayerKind::Conv2D: {
      const Tensor& x = *in[0];
      const int kh = layer.kernel_h, kw = layer.kernel_w;
      int pt = 0, pb = 0, pl = 0, pr = 0;
      if (layer.padding == Padding::Same) {
        same_padding(x.shape.h, kh, layer.stride_h, &pt, &pb);
        same_padding(x.shape.w, kw, layer.stride_w, &pl, &pr);
      }
      const int oh = out.shape.h, ow = out.shape.w, co = out.shape.c;
      ConstMapMat ker(layer.weights[0].v.data(), kh * kw * x.shape.c, co);
      MapMat dker(weight_grads[0].v.data(), kh * kw * x.shape.c, co);
      RowMat col, dcol;
      for (int item = 0; item < x.shape.n; ++item) {
        ConstMapMat dy(dout.v.data() + size_t(item) * dout.shape.per_item(), oh * ow, co);
        im2col(x, kh, kw, layer.stride_h, layer.stride_w, pt, pl, oh, ow, item, col);
        dker.noalias() += col.transpose() * dy;
        if (layer.use_bias) {
          MapMat dbias(weight_grads[1].v.data(), 1, co);
          dbias.row(0) += dy.colwise().sum();
        }
        if (!din.empty() && din[0]) {
          dcol.noalias() = dy * ker.transpose();
          col2im_add(dcol, kh, kw, layer.stride_h, layer.stride_w, pt, pl, oh, ow, item,
                     *din[0]);
        }
      }
      return;
    }

    case LayerKind::DepthwiseConv2D: {
      const Tensor& x = *in[0];
      const int kh = layer.kernel_h, kw = layer.kernel_w, c = x.shape.c;
      int pt = 0, pb = 0, pl = 0, pr = 0;
      if (layer.padding == Padding::Same) {
        same_padding(x.shape.h, kh, layer.stride_h, &pt, &pb);
        same_padding(x.shape.w, kw, layer.stride_w, &pl, &pr);
      }
      const int oh = out.shape.h, ow = out.shape.w;
      const float* K = layer.weights[0].v.data();
      float* dK = weight_grads[0].v.data();
      for (int item = 0; item < x.shape.n; ++item) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const float* dy = &dout.v[((size_t(item) * oh + oy) * ow + ox) * c];
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * layer.stride_h + ky - pt;
              if (iy < 0 || iy >= x.shape.h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * layer.stride_w + kx - pl;
                if (ix < 0 || ix >= x.shape.w) continue;
                const size_t xoff = ((size_t(item) * x.shape.h + iy) * x.shape.w + ix) * c;
                const size_t koff = (size_t(ky) * kw + kx) * c;
                for (int ci = 0; ci < c; ++ci) {
                  dK[koff + ci] += x.v[xoff + ci] * dy[ci];
                  if (!din.empty() && din[0]) din[0]->v[xoff + ci] += K[koff + ci] * dy[ci];
                }
              }
            }
            if (layer.use_bias) {
              float* db = weight_grads[1].v.data();
              for (int ci = 0; ci < c; ++ci) db[ci] += dy[ci];
            }
          }
        }
      }
      return;
    }

    case LayerKind::Dense: {
      const Tensor& x = *in[0];
      const int ci = x.shape.c, co = out.shape.c;
      ConstMapMat xin(x.v.data(), x.shape.n, ci);
      ConstMapMat dy(dout.v.data(), x.shape.n, co);
      MapMat dker(weight_grads[0].v.data(), ci, co);
      dker.noalias() += xin.transpose() * dy;
      if (layer.use_bias) {
        MapMat dbias(weight_grads[1].v.data(), 1, co);
        dbias.row(0) += dy.colwise().sum();
      }
      if (!din.empty() && din[0]) {
        ConstMapMat ker(layer.weights[0].v.data(), ci, co);
        MapMat dx(din[0]->v.data(), x.shape.n, ci);
        dx.noalias() += dy * ker.transpose();
      }
      return;
    }

    case LayerKind::BatchNorm: {
      const Tensor& x = *in[0];
      const int c = x.shape.c;
      const size_t m = x.size() / size_t(c);
      const float eps = float(layer.bn_epsilon);
      const float* gamma = layer.weights[0].v.data();
      const float* mmean = layer.weights[2].v.data();
      const float* mvar = layer.weights[3].v.data();
      const bool batch_mode = ctx.training && layer.trainable;

      std::vector<float> mu(size_t(c), 0.0f), var(size_t(c), 0.0f);
      if (batch_mode) {
        for (size_t i = 0; i < m; ++i)
          for (int ch = 0; ch < c; ++ch) mu[size_t(ch)] += x.v[i * c + ch];
        for (int ch = 0; ch < c; ++ch) mu[size_t(ch)] /= float(m);
        for (size_t i = 0; i < m; ++i)
          for (int ch = 0; ch < c; ++ch) {
            const float d = x.v[i * c + ch] - mu[size_t(ch)];
            var[size_t(ch)] += d * d;
          }
        for (int ch = 0; ch < c; ++ch) var[size_t(ch)] /= float(m);
      } else {
        for (int ch = 0; ch < c; ++ch) {
          mu[size_t(ch)] = mmean[ch];
          var[size_t(ch)] = mvar[ch];
        }
      }
      std::vector<float> istd(size_t(c), 0.0f);
      for (int ch = 0; ch < c; ++ch) istd[size_t(ch)] = 1.0f / std::sqrt(var[size_t(ch)] + eps);

      std::vector<double> sum_dy(size_t(c), 0.0), sum_dy_xhat(size_t(c), 0.0);
      for (size_t i = 0; i < m; ++i)
        for (int ch = 0; ch < c; ++ch) {
          const float xhat = (x.v[i * c + ch] - mu[size_t(ch)]) * istd[size_t(ch)];
          sum_dy[size_t(ch)] += dout.v[i * c + ch];
          sum_dy_xhat[size_t(ch)] += double(dout.v[i * c + ch]) * xhat;
        }
      float* dgamma = weight_grads[0].v.data();
      float* dbeta = weight_grads[1].v.data();
      for (int ch = 0; ch < c; ++ch) {
        dgamma[ch] += float(sum_dy_xhat[size_t(ch)]);
        dbeta[ch] += float(sum_dy[size_t(ch)]);
      }
      if (!din.empty() && din[0]) {
        Tensor& dx = *din[0];
        if (batch_mode) {
          for (size_t i = 0; i < m; ++i)
            for (int ch = 0; ch < c; ++ch) {
              const float xhat = (x.v[i * c + ch] - mu[size_t(ch)]) * istd[size_t(ch)];
              dx.v[i * c + ch] +=
                  gamma[ch] * istd[size_t(ch)] *
                  (dout.v[i * c + ch] - float(sum_dy[size_t(ch)]) / float(m) -
                   xhat * float(sum_dy_xhat[size_t(ch)]) / float(m));
            }
        } else {
          for (size_t i = 0; i < m; ++i)
            for (int ch = 0; ch < c; ++ch)
              dx.v[i * c + ch] += dout.v[i * c + ch] * gamma[ch] * istd[size_t(ch)];
        }
      }
      return;
    }

    case LayerKind::Activation: {
      if (din.empty() || !din[0]) return;
      const Tensor& x = *in[0];
      Tensor& dx = *din[0];
      if (layer.act == Act::Softmax) {
        const int c = x.shape.c;
        const size_t m = x.size() / size_t(c);
        for (size_t i = 0; i < m; ++i) {
          const float* s = &out.v[i * c];
          const float* dy = &dout.v[i * c];
          float dot = 0.0f;
          for (int ch = 0; ch < c; ++ch) dot += dy[ch] * s[ch];
          for (int ch = 0; ch < c; ++ch) dx.v[i * c + ch] += s[ch] * (dy[ch] - dot);
        }
      } else {
        for (size_t i = 0; i < x.size(); ++i)
          dx.v[i] += dout.v[i] * act_grad(layer.act, x.v[i]);
      }
      return;
    }

    case LayerKind::MaxPool: {
      if (din.empty() || !din[0]) return;
      const Tensor& x = *in[0];
      Tensor& dx = *din[0];
      int pt, pl;
      pool_pads(layer, x.shape, &pt, &pl);
      const int oh = out.shape.h, ow = out.shape.w, c = x.shape.c;
      for (int item = 0; item < x.shape.n; ++item) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
              // route to the first occurrence of the max (deterministic)
              float best = -std::numeric_limits<float>::infinity();
              int by = -1, bx = -1;
              for (int ky = 0; ky < layer.kernel_h; ++ky) {
                const int iy = oy * layer.stride_h + ky - pt;
                if (iy < 0 || iy >= x.shape.h) continue;
                for (int kx = 0; kx < layer.kernel_w; ++kx) {
                  const int ix = ox * layer.stride_w + kx - pl;
                  if (ix < 0 || ix >= x.shape.w) continue;
                  const float v = x.at(item, iy, ix, ch);
                  if (v > best) {
                    best = v;
                    by = iy;
                    bx = ix;
                  }
                }
              }
              if (by >= 0) dx.at(item, by, bx, ch) += dout.at(item, oy, ox, ch);
            }
          }
        }
      }
      return;
    }

    case LayerKind::AvgPool: {
      if (din.empty() || !din[0]) return;
      const Tensor& x = *in[0];
      Tensor& dx = *din[0];
      int pt, pl;
      pool_pads(layer, x.shape, &pt, &pl);
      const int oh = out.shape.h, ow = out.shape.w, c = x.shape.c;
      for (int item = 0; item < x.shape.n; ++item) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            int cnt = 0;
            for (int ky = 0; ky < layer.kernel_h; ++ky) {
              const int iy = oy * layer.stride_h + ky - pt;
              if (iy >= 0 && iy < x.shape.h)
                for (int kx = 0; kx < layer.kernel_w; ++kx) {
                  const int ix = ox * layer.stride_w + kx - pl;
                  if (ix >= 0 && ix < x.shape.w) ++cnt;
                }
            }
            if (cnt == 0) continue;
            for (int ky = 0; ky < layer.kernel_h; ++ky) {
              const int iy = oy * layer.stride_h + ky - pt;
              if (iy < 0 || iy >= x.shape.h) continue;
              for (int kx = 0; kx < layer.kernel_w; ++kx) {
                const int ix = ox * layer.stride_w + kx - pl;
                if (ix < 0 || ix >= x.shape.w) continue;
                for (int ch = 0; ch < c; ++ch)
                  dx.at(item, iy, ix, ch) += dout.at(item, oy, ox, ch) / float(cnt);
              }
            }
          }
        }
      }
      return;
    }

    case LayerKind::GlobalAvgPool: {
      if (din.empty() || !din[0]) return;
      const Tensor& x = *in[0];
      Tensor& dx = *din[0];
      const int c = x.shape.c;
      const size_t hw = size_t(x.shape.h) * x.shape.w;
      for (int item = 0; item < x.shape.n; ++item) {
        const float* dy = &dout.v[size_t(item) * c];
        float* d = &dx.v[size_t(item) * hw * c];
        for (size_t i = 0; i < hw; ++i)
          for (int ch = 0; ch < c; ++ch) d[i * c + ch] += dy[ch] / float(hw);
      }
      return;
    }

    case LayerKind::Add: {
      for (size_t k = 0; k < din.size(); ++k) {
        Tensor* d = din[k];
        if (!d) continue;
        const float ck = k < layer.add_coeffs.size() ? layer.add_coeffs[k] : 1.0f;
        for (size_t i = 0; i < dout.size(); ++i) d->v[i] += ck * dout.v[i];
      }
      return;
    }

    case LayerKind::Multiply: {
      const Tensor* a = in[0];
      const Tensor* b = in[1];
      Tensor* da = din.size() > 0 ? din[0] : nullptr;
      Tensor* db = din.size() > 1 ? din[1] : nullptr;
      if (a->size() == b->size()) {
        for (size_t i = 0; i < dout.size(); ++i) {
          if (da) da->v[i] += dout.v[i] * b->v[i];
          if (db) db->v[i] += dout.v[i] * a->v[i];
        }
        return;
      }
      const Tensor* big = a;
      const Tensor* small = b;
      Tensor* dbig = da;
      Tensor* dsmall = db;
      if (big->size() < small->size()) {
        std::swap(big, small);
        std::swap(dbig, dsmall);
      }
      const int c = big->shape.c;
      const size_t hw = size_t(big->shape.h) * big->shape.w;
      for (int item = 0; item < big->shape.n; ++item) {
        const float* sv = &small->v[size_t(item) * c];
        const float* bv = &big->v[size_t(item) * hw * c];
        const float* dy = &dout.v[size_t(item) * hw * c];
        for (size_t i = 0; i < hw; ++i)
          for (int ch = 0; ch < c; ++ch) {
            if (dbig) dbig->v[size_t(item) * hw * c + i * c + ch] += dy[i * c + ch] * sv[ch];
            if (dsmall) dsmall->v[size_t(item) * c + ch] += dy[i * c + ch] * bv[i * c + ch];
          }
      }
      return;
    }

    case LayerKind::Concat: {
      const int oc = out.shape.c;
      const size_t positions = size_t(out.shape.n) * out.shape.h * out.shape.w;
      int offset = 0;
      for (size_t k = 0; k < in.size(); ++k) {
        const int c = in[k]->shape.c;
        if (k < din.size() && din[k]) {
          for (size_t i = 0; i < positions; ++i)
            for (int ch = 0; ch < c; ++ch)
              din[k]->v[i * c + ch] += dout.v[i * oc + offset + ch];
        }
        offset += c;
      }
      return;
    }

    case LayerKind::ZeroPad: {
      if (din.empty() || !din[0]) return;
      Tensor& dx = *din[0];
      const int c = dx.shape.c;
      for (int item = 0; item < dx.shape.n; ++item)
        for (int y = 0; y < dx.shape.h; ++y)
          for (int xx = 0; xx < dx.shape.w; ++xx)
            for (int ch = 0; ch < c; ++ch)
              dx.at(item, y, xx, ch) += dout.at(item, y + layer.pad_t, xx + layer.pad_l, ch);
      return;
    }

    case LayerKind::Crop: {
      if (din.empty() || !din[0]) return;
      Tensor& dx = *din[0];
      const int c = dx.shape.c;
      for (int item = 0; item < dout.shape.n; ++item)
        for (int y = 0; y < dout.shape.h; ++y)
          for (int xx = 0; xx < dout.shape.w; ++xx)
            for (int ch = 0; ch < c; ++ch)
              dx.at(item, y + layer.pad_t, xx + layer.pad_l, ch) += dout.at(item, y, xx, ch);
      return;
    }

    case LayerKind::Dropout: {
      if (din.empty() || !din[0]) return;
      if (!ctx.training || layer.rate <= 0.0) {
        for (size_t i = 0; i < dout.size(); ++i) din[0]->v[i] += dout.v[i];
        return;
      }
      const Tensor& mask = *ctx.aux;
      for (size_t i = 0; i < dout.size(); ++i) din[0]->v[i] += dout.v[i] * mask.v[i];
      return;
    }
  }
  fail("layer_backward: unhandled layer kind");
}

}  // namespace lymebench::nn
