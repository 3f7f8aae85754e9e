#pragma once

#include <string>
#include <vector>

#include "lymebench/nn/layers.hpp"

namespace lymebench::nn {

// A DAG of layers stored in topological (execution) order. Builders append
// nodes; shapes are inferred at add time for a single item (n == 1) and
// re-derived per batch at run time.
class Model {
 public:
  std::vector<Layer> layers;
  std::string backbone_name;
  Shape input_shape;     // per item
  int head_start = -1;   // first node of the classifier head, -1 if headless

  int add_layer(Layer l);

  int output_node() const { return int(layers.size()) - 1; }
  const Layer& output() const { return layers.back(); }
  int find_layer(const std::string& name) const;  // -1 if absent

  // Backbone layers in the canonical counting convention: every node except
  // Input and Preprocess, up to (excluding) the head.
  std::vector<int> backbone_layer_nodes() const;
  int backbone_layer_count() const;  // N

  long long total_params() const;
  void init_weights(uint64_t seed);

  // ---- execution ----
  struct Workspace {
    std::vector<Tensor> act;
    std::vector<Tensor> grad;
    std::vector<Tensor> aux;
    bool training = false;  // mode of the forward pass the workspace holds
  };

  void forward(const Tensor& input, Workspace& ws, bool training = false, Rng* rng = nullptr,
               bool update_bn_stats = true);

  // Per-layer weight gradients, allocated by zero_grads().
  std::vector<std::vector<Tensor>> grads;
  void zero_grads();

  // Backpropagate `dseed` (gradient at `from_node`'s output) through nodes
  // [stop_node, from_node]. Gradients for node outputs land in ws.grad,
  // weight gradients accumulate into `grads`.
  void backward(Workspace& ws, int from_node, const Tensor& dseed, int stop_node = 0);

  // ---- weights bookkeeping ----
  uint64_t weights_checksum(int first_node, int last_node) const;  // inclusive node range
  std::vector<Tensor> snapshot_weights() const;
  void restore_weights(const std::vector<Tensor>& snap);

  void save_weights(const fs::path& path) const;
  void load_weights(const fs::path& path);

 private:
  Shape runtime_shape(int node, int batch) const;
};

}  // namespace lymebench::nn
