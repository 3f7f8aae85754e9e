#include "lymebench/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace lymebench::nn {

Adam::Adam(Model& model, AdamConfig cfg) : model_(model), cfg_(cfg) {
  m_.resize(model.layers.size());
  v_.resize(model.layers.size());
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const int opt = l.optimizable_weight_count();
    m_[i].resize(size_t(opt));
    v_[i].resize(size_t(opt));
    for (int j = 0; j < opt; ++j) {
      m_[i][size_t(j)] = Tensor(l.weights[size_t(j)].shape);
      v_[i][size_t(j)] = Tensor(l.weights[size_t(j)].shape);
    }
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  const float lr_t = float(cfg_.lr * std::sqrt(bc2) / bc1);
  const float b1 = float(cfg_.beta1), b2 = float(cfg_.beta2), eps = float(cfg_.epsilon);

  for (size_t i = 0; i < model_.layers.size(); ++i) {
    Layer& l = model_.layers[i];
    if (!l.trainable) continue;
    const int opt = l.optimizable_weight_count();
    for (int j = 0; j < opt; ++j) {
      Tensor& w = l.weights[size_t(j)];
      const Tensor& g = model_.grads[i][size_t(j)];
      Tensor& m = m_[i][size_t(j)];
      Tensor& v = v_[i][size_t(j)];
      for (size_t k = 0; k < w.size(); ++k) {
        m.v[k] = b1 * m.v[k] + (1.0f - b1) * g.v[k];
        v.v[k] = b2 * v.v[k] + (1.0f - b2) * g.v[k] * g.v[k];
        w.v[k] -= lr_t * m.v[k] / (std::sqrt(v.v[k]) + eps);
      }
    }
  }
}

namespace {

// The loss gradient is seeded at the logit node (the final activation's
// input) to keep sigmoid/softmax + cross-entropy numerically fused.
int logit_node(const Model& model, LossKind loss) {
  const Layer& out = model.layers.back();
  if (out.kind != LayerKind::Activation) fail("model output must be an activation node");
  if (loss == LossKind::SigmoidBinaryCE && out.act != Act::Sigmoid)
    fail("binary cross-entropy expects a sigmoid output");
  if (loss == LossKind::SoftmaxCE && out.act != Act::Softmax)
    fail("categorical cross-entropy expects a softmax output");
  return out.inputs.at(0);
}

int min_trainable_node(const Model& model) {
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    if (l.trainable && l.optimizable_weight_count() > 0) return int(i);
  }
  return int(model.layers.size()) - 1;
}

Tensor make_batch(const LabeledImageSet& data, const std::vector<size_t>& idx, size_t from,
                  size_t to) {
  const int b = int(to - from);
  Tensor x(b, data.height, data.width, 3);
  for (int i = 0; i < b; ++i) {
    const auto& img = data.images[idx[from + size_t(i)]];
    std::copy(img.begin(), img.end(), x.v.begin() + size_t(i) * img.size());
  }
  return x;
}

struct BatchLoss {
  double loss_sum = 0.0;
  long long correct = 0;
};

// Evaluates loss/accuracy of `probs` (output activations) and fills the seed
// gradient at the logits if `dlogit` is given.
BatchLoss batch_loss_and_grad(const Tensor& probs, const std::vector<int>& labels,
                              LossKind loss, Tensor* dlogit) {
  BatchLoss r;
  const int b = probs.shape.n;
  const int c = probs.shape.c;
  constexpr float kEps = 1e-7f;
  for (int i = 0; i < b; ++i) {
    if (loss == LossKind::SigmoidBinaryCE) {
      const float p = std::clamp(probs.v[size_t(i)], kEps, 1.0f - kEps);
      const float y = float(labels[size_t(i)]);
      r.loss_sum += -double(y * std::log(p) + (1.0f - y) * std::log(1.0f - p));
      const bool pred_pos = probs.v[size_t(i)] >= 0.5f;
      if (int(pred_pos) == labels[size_t(i)]) ++r.correct;
      if (dlogit) dlogit->v[size_t(i)] = (p - y) / float(b);
    } else {
      const int y = labels[size_t(i)];
      const float py = std::max(probs.v[size_t(i) * c + y], kEps);
      r.loss_sum += -double(std::log(py));
      int argmax = 0;
      for (int ch = 1; ch < c; ++ch)
        if (probs.v[size_t(i) * c + ch] > probs.v[size_t(i) * c + argmax]) argmax = ch;
      if (argmax == y) ++r.correct;
      if (dlogit)
        for (int ch = 0; ch < c; ++ch)
          dlogit->v[size_t(i) * c + ch] =
              (probs.v[size_t(i) * c + ch] - (ch == y ? 1.0f : 0.0f)) / float(b);
    }
  }
  return r;
}

}  // namespace

FitResult fit(Model& model, const LabeledImageSet& train, const LabeledImageSet& val,
              const FitConfig& cfg) {
  if (train.size() == 0) fail("fit: empty training set");
  if (val.size() == 0) fail("fit: empty validation set");
  if (cfg.batch_size < 1 || cfg.patience < 1 || cfg.max_epochs < 1)
    fail("fit: invalid configuration");

  Adam adam(model, {.lr = cfg.lr});
  const int seed_node = logit_node(model, cfg.loss);
  const int stop_node = min_trainable_node(model);

  FitResult result;
  Model::Workspace ws;
  std::vector<Tensor> best_snapshot;
  int wait = 0;

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(substream_seed(cfg.seed, "epoch-shuffle:" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);
    Rng dropout_rng(substream_seed(cfg.seed, "dropout:" + std::to_string(epoch)));

    BatchLoss train_tally;
    for (size_t from = 0; from < train.size(); from += size_t(cfg.batch_size)) {
      const size_t to = std::min(train.size(), from + size_t(cfg.batch_size));
      Tensor x = make_batch(train, order, from, to);
      std::vector<int> labels;
      for (size_t i = from; i < to; ++i) labels.push_back(train.labels[order[i]]);

      model.forward(x, ws, /*training=*/true, &dropout_rng);
      const Tensor& probs = ws.act.back();
      Tensor dlogit(ws.act[size_t(seed_node)].shape);
      const BatchLoss bl = batch_loss_and_grad(probs, labels, cfg.loss, &dlogit);
      train_tally.loss_sum += bl.loss_sum;
      train_tally.correct += bl.correct;

      model.zero_grads();
      model.backward(ws, seed_node, dlogit, stop_node);
      adam.step();
    }

    auto [val_loss, val_acc] = evaluate(model, val, cfg.loss, cfg.batch_size);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_tally.loss_sum / double(train.size());
    rec.train_acc = double(train_tally.correct) / double(train.size());
    rec.val_loss = val_loss;
    rec.val_acc = val_acc;
    result.history.push_back(rec);
    result.stopped_epoch = epoch;
    if (cfg.verbose)
      std::cerr << "epoch " << epoch << " loss " << rec.train_loss << " acc " << rec.train_acc
                << " val_loss " << val_loss << " val_acc " << val_acc << "\n";

    if (val_acc > result.best_val_acc || result.best_epoch < 0) {
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      wait = 0;
      if (cfg.restore_best) best_snapshot = model.snapshot_weights();
    } else {
      ++wait;
      if (wait >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }

  if (cfg.restore_best && !best_snapshot.empty()) model.restore_weights(best_snapshot);
  return result;
}

std::vector<std::vector<float>> predict(Model& model, const LabeledImageSet& data,
                                        int batch_size) {
  std::vector<std::vector<float>> out;
  Model::Workspace ws;
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t from = 0; from < data.size(); from += size_t(batch_size)) {
    const size_t to = std::min(data.size(), from + size_t(batch_size));
    Tensor x = make_batch(data, order, from, to);
    model.forward(x, ws, /*training=*/false);
    const Tensor& probs = ws.act.back();
    const int c = probs.shape.c;
    for (int i = 0; i < probs.shape.n; ++i)
      out.emplace_back(probs.v.begin() + size_t(i) * c, probs.v.begin() + size_t(i + 1) * c);
  }
  return out;
}

std::pair<double, double> evaluate(Model& model, const LabeledImageSet& data, LossKind loss,
                                   int batch_size) {
  if (data.size() == 0) fail("evaluate: empty dataset");
  Model::Workspace ws;
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  BatchLoss tally;
  for (size_t from = 0; from < data.size(); from += size_t(batch_size)) {
    const size_t to = std::min(data.size(), from + size_t(batch_size));
    Tensor x = make_batch(data, order, from, to);
    std::vector<int> labels;
    for (size_t i = from; i < to; ++i) labels.push_back(data.labels[order[i]]);
    model.forward(x, ws, /*training=*/false);
    const BatchLoss bl = batch_loss_and_grad(ws.act.back(), labels, loss, nullptr);
    tally.loss_sum += bl.loss_sum;
    tally.correct += bl.correct;
  }
  return {tally.loss_sum / double(data.size()), double(tally.correct) / double(data.size())};
}

}  // namespace lymebench::nn
