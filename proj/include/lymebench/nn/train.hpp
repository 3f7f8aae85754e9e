#pragma once

#include <vector>

#include "lymebench/nn/model.hpp"

namespace lymebench::nn {

// Images resized to the model input, raw [0,255] floats, channels-last.
// The model graph applies its own preprocessing layer.
struct LabeledImageSet {
  int height = 0, width = 0;
  std::vector<std::vector<float>> images;
  std::vector<int> labels;

  size_t size() const { return images.size(); }
  void push(std::vector<float> img, int label) {
    images.push_back(std::move(img));
    labels.push_back(label);
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Adaptive moment estimation over the trainable layers' optimizable weights
// (BN moving statistics are never touched by the optimizer).
class Adam {
 public:
  Adam(Model& model, AdamConfig cfg);
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  Model& model_;
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<Tensor>> m_, v_;
};

enum class LossKind { SigmoidBinaryCE, SoftmaxCE };

struct FitConfig {
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;       // epochs without validation-accuracy improvement
  double lr = 1e-4;
  LossKind loss = LossKind::SigmoidBinaryCE;
  int num_classes = 2;
  uint64_t seed = 0;
  bool restore_best = true;
  bool verbose = false;
};

struct EpochRecord {
  int epoch = 0;  // 0-based within this fit call
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  int stopped_epoch = -1;
  double best_val_acc = 0.0;
  bool stopped_early = false;
};

// Minibatch training with early stopping on validation accuracy and
// best-weight restoration. Fully deterministic for a fixed seed.
FitResult fit(Model& model, const LabeledImageSet& train, const LabeledImageSet& val,
              const FitConfig& cfg);

// Batched inference (eval mode); one row of output-node activations per item.
std::vector<std::vector<float>> predict(Model& model, const LabeledImageSet& data,
                                        int batch_size = 32);

// Loss/accuracy of the current weights on a set (eval mode).
std::pair<double, double> evaluate(Model& model, const LabeledImageSet& data, LossKind loss,
                                   int batch_size = 32);

}  // namespace lymebench::nn
