#include "lymebench/nn/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace lymebench::nn {

int Model::add_layer(Layer l) {
  if (l.kind == LayerKind::Input) {
    if (!layers.empty()) fail("input layer must be the first node");
    l.out = input_shape;
  } else {
    std::vector<Shape> in_shapes;
    for (int idx : l.inputs) {
      if (idx < 0 || idx >= int(layers.size())) fail("layer input index out of range");
      in_shapes.push_back(layers[size_t(idx)].out);
    }
    l.out = infer_shape(l, in_shapes);
  }

  // allocate weights
  const Shape& in0 = l.inputs.empty() ? l.out : layers[size_t(l.inputs[0])].out;
  switch (l.kind) {
    case LayerKind::Conv2D:
      l.weights.push_back(Tensor(l.kernel_h, l.kernel_w, in0.c, l.filters));
      if (l.use_bias) l.weights.push_back(Tensor(1, 1, 1, l.filters));
      break;
    case LayerKind::DepthwiseConv2D:
      l.weights.push_back(Tensor(l.kernel_h, l.kernel_w, in0.c, 1));
      if (l.use_bias) l.weights.push_back(Tensor(1, 1, 1, in0.c));
      break;
    case LayerKind::Dense:
      l.weights.push_back(Tensor(1, 1, in0.c, l.filters));
      if (l.use_bias) l.weights.push_back(Tensor(1, 1, 1, l.filters));
      break;
    case LayerKind::BatchNorm:
      for (int i = 0; i < 4; ++i) l.weights.push_back(Tensor(1, 1, 1, in0.c));
      break;
    default:
      break;
  }
  layers.push_back(std::move(l));
  return int(layers.size()) - 1;
}

int Model::find_layer(const std::string& name) const {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return int(i);
  return -1;
}

std::vector<int> Model::backbone_layer_nodes() const {
  std::vector<int> nodes;
  const int end = head_start >= 0 ? head_start : int(layers.size());
  for (int i = 0; i < end; ++i) {
    const LayerKind k = layers[size_t(i)].kind;
    if (k == LayerKind::Input || k == LayerKind::Preprocess) continue;
    nodes.push_back(i);
  }
  return nodes;
}

int Model::backbone_layer_count() const { return int(backbone_layer_nodes().size()); }

long long Model::total_params() const {
  long long n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

void Model::init_weights(uint64_t seed) {
  for (auto& l : layers) {
    Rng rng(substream_seed(seed, "init:" + l.name));
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::DepthwiseConv2D:
      case LayerKind::Dense: {
        Tensor& k = l.weights[0];
        const double fan_in = double(k.shape.n) * k.shape.w * k.shape.h;  // kh*kw*cin
        const double fan_out = double(k.shape.n) * k.shape.h * k.shape.c;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out + 1e-9));
        for (auto& v : k.v) v = float(rng.next_range(-limit, limit));
        if (l.use_bias) l.weights[1].zero();
        break;
      }
      case LayerKind::BatchNorm:
        std::fill(l.weights[0].v.begin(), l.weights[0].v.end(), 1.0f);  // gamma
        l.weights[1].zero();                                            // beta
        l.weights[2].zero();                                            // moving mean
        std::fill(l.weights[3].v.begin(), l.weights[3].v.end(), 1.0f);  // moving var
        break;
      default:
        break;
    }
  }
}

Shape Model::runtime_shape(int node, int batch) const {
  Shape s = layers[size_t(node)].out;
  s.n = batch;
  return s;
}

void Model::forward(const Tensor& input, Workspace& ws, bool training, Rng* rng,
                    bool update_bn_stats) {
  if (layers.empty() || layers[0].kind != LayerKind::Input) fail("model has no input node");
  if (input.shape.h != input_shape.h || input.shape.w != input_shape.w ||
      input.shape.c != input_shape.c)
    fail("input tensor shape does not match the model input shape");

  const int batch = input.shape.n;
  ws.act.resize(layers.size());
  ws.aux.resize(layers.size());
  ws.training = training;

  for (size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    const Shape want = runtime_shape(int(i), batch);
    if (!(ws.act[i].shape == want) || ws.act[i].v.size() != want.count())
      ws.act[i] = Tensor(want);

    std::vector<const Tensor*> ins;
    if (l.kind == LayerKind::Input) {
      ins.push_back(&input);
    } else {
      for (int idx : l.inputs) ins.push_back(&ws.act[size_t(idx)]);
    }
    LayerCtx ctx;
    ctx.training = training;
    ctx.rng = rng;
    ctx.aux = &ws.aux[i];
    ctx.update_bn_stats = update_bn_stats;
    layer_forward(l, ins, ws.act[i], ctx);
  }
}

void Model::zero_grads() {
  grads.resize(layers.size());
  for (size_t i = 0; i < layers.size(); ++i) {
    auto& g = grads[i];
    const auto& w = layers[i].weights;
    g.resize(w.size());
    for (size_t j = 0; j < w.size(); ++j) {
      if (!(g[j].shape == w[j].shape) || g[j].v.size() != w[j].size())
        g[j] = Tensor(w[j].shape);
      else g[j].zero();
    }
  }
}

void Model::backward(Workspace& ws, int from_node, const Tensor& dseed, int stop_node) {
  if (from_node < 0 || from_node >= int(layers.size())) fail("backward: bad from_node");
  if (grads.size() != layers.size()) zero_grads();
  const int batch = ws.act.empty() ? 1 : ws.act[0].shape.n;

  ws.grad.resize(layers.size());
  for (int i = 0; i <= from_node; ++i) {
    const Shape want = runtime_shape(i, batch);
    if (!(ws.grad[size_t(i)].shape == want) || ws.grad[size_t(i)].v.size() != want.count())
      ws.grad[size_t(i)] = Tensor(want);
    else ws.grad[size_t(i)].zero();
  }
  if (!(dseed.shape == ws.grad[size_t(from_node)].shape))
    fail("backward: seed gradient shape mismatch");
  ws.grad[size_t(from_node)] = dseed;

  for (int i = from_node; i >= std::max(stop_node, 1); --i) {
    Layer& l = layers[size_t(i)];
    std::vector<const Tensor*> ins;
    std::vector<Tensor*> dins;
    for (int idx : l.inputs) {
      ins.push_back(&ws.act[size_t(idx)]);
      dins.push_back(&ws.grad[size_t(idx)]);
    }
    LayerCtx ctx;
    ctx.training = ws.training;  // mirror the forward pass's mode
    ctx.aux = &ws.aux[size_t(i)];
    layer_backward(l, ins, ws.act[size_t(i)], ws.grad[size_t(i)], dins, grads[size_t(i)], ctx);
  }
}

uint64_t Model::weights_checksum(int first_node, int last_node) const {
  if (last_node < 0) last_node = int(layers.size()) - 1;
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = first_node; i <= last_node && i < int(layers.size()); ++i) {
    for (const auto& w : layers[size_t(i)].weights) {
      const char* bytes = reinterpret_cast<const char*>(w.v.data());
      h = fnv1a64(std::string_view(bytes, w.v.size() * sizeof(float)), h);
    }
  }
  return h;
}

std::vector<Tensor> Model::snapshot_weights() const {
  std::vector<Tensor> snap;
  for (const auto& l : layers)
    for (const auto& w : l.weights) snap.push_back(w);
  return snap;
}

void Model::restore_weights(const std::vector<Tensor>& snap) {
  size_t idx = 0;
  for (auto& l : layers)
    for (auto& w : l.weights) {
      if (idx >= snap.size() || !(snap[idx].shape == w.shape))
        fail("restore_weights: snapshot does not match model");
      w = snap[idx++];
    }
  if (idx != snap.size()) fail("restore_weights: snapshot does not match model");
}

// ---------------------------------------------------------------------------
// weights blob: "LBWT" | u32 version | u32 n entries |
//   per entry: u32 name len, name bytes, u32 n tensors,
//              per tensor: 4 x i32 dims, raw float32 data
// | u64 fnv checksum of everything before it
// ---------------------------------------------------------------------------
namespace {

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size()) fail("weights blob truncated");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void Model::save_weights(const fs::path& path) const {
  std::string buf;
  buf.append("LBWT");
  put<uint32_t>(buf, 1);
  uint32_t entries = 0;
  for (const auto& l : layers)
    if (l.has_weights()) ++entries;
  put<uint32_t>(buf, entries);
  for (const auto& l : layers) {
    if (!l.has_weights()) continue;
    put<uint32_t>(buf, uint32_t(l.name.size()));
    buf.append(l.name);
    put<uint32_t>(buf, uint32_t(l.weights.size()));
    for (const auto& w : l.weights) {
      put<int32_t>(buf, w.shape.n);
      put<int32_t>(buf, w.shape.h);
      put<int32_t>(buf, w.shape.w);
      put<int32_t>(buf, w.shape.c);
      buf.append(reinterpret_cast<const char*>(w.v.data()), w.v.size() * sizeof(float));
    }
  }
  put<uint64_t>(buf, fnv1a64(buf));
  write_text_file(path, buf);
}

void Model::load_weights(const fs::path& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 16 || buf.compare(0, 4, "LBWT") != 0)
    fail("not a weights blob: " + path.string());
  {
    const std::string body = buf.substr(0, buf.size() - 8);
    size_t coff = buf.size() - 8;
    const uint64_t want = take<uint64_t>(buf, coff);
    if (fnv1a64(body) != want) fail("weights blob checksum mismatch: " + path.string());
  }
  size_t off = 4;
  const uint32_t version = take<uint32_t>(buf, off);
  if (version != 1) fail("unsupported weights blob version");
  const uint32_t entries = take<uint32_t>(buf, off);
  for (uint32_t e = 0; e < entries; ++e) {
    const uint32_t nlen = take<uint32_t>(buf, off);
    if (off + nlen > buf.size()) fail("weights blob truncated");
    const std::string name = buf.substr(off, nlen);
    off += nlen;
    const int node = find_layer(name);
    if (node < 0) fail("weights blob references unknown layer: " + name);
    Layer& l = layers[size_t(node)];
    const uint32_t ntensors = take<uint32_t>(buf, off);
    if (ntensors != l.weights.size())
      fail("weights blob tensor count mismatch for layer: " + name);
    for (uint32_t t = 0; t < ntensors; ++t) {
      Shape s;
      s.n = take<int32_t>(buf, off);
      s.h = take<int32_t>(buf, off);
      s.w = take<int32_t>(buf, off);
      s.c = take<int32_t>(buf, off);
      if (!(s == l.weights[t].shape)) fail("weights blob shape mismatch for layer: " + name);
      const size_t bytes = s.count() * sizeof(float);
      if (off + bytes > buf.size()) fail("weights blob truncated");
      std::memcpy(l.weights[t].v.data(), buf.data() + off, bytes);
      off += bytes;
    }
  }
}

}  // namespace lymebench::nn
