#include "lymebench/transfer.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "lymebench/image.hpp"

namespace lymebench::transfer {

using backbones::Registry;
using backbones::WeightSource;
using nn::Act;
using nn::Layer;
using nn::LayerKind;
using nn::Model;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::NTL: return "NTL";
    case Strategy::HAM_FFT: return "HAM_FFT";
    case Strategy::IMG_WFT: return "IMG_WFT";
    case Strategy::IMG_FFT: return "IMG_FFT";
    case Strategy::IMG_FTU: return "IMG_FTU";
    case Strategy::IMG_HAMFP_FTU: return "IMG_HAMFP_FTU";
    case Strategy::IMG_HAMPP_FTU: return "IMG_HAMPP_FTU";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : all_strategies())
    if (name == strategy_name(s)) return s;
  fail("unknown strategy: " + name +
       " (expected one of NTL, HAM_FFT, IMG_WFT, IMG_FFT, IMG_FTU, IMG_HAMFP_FTU, "
       "IMG_HAMPP_FTU)");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = {
      Strategy::NTL,     Strategy::HAM_FFT,       Strategy::IMG_WFT,      Strategy::IMG_FFT,
      Strategy::IMG_FTU, Strategy::IMG_HAMFP_FTU, Strategy::IMG_HAMPP_FTU};
  return all;
}

bool strategy_needs_unfreeze_depth(Strategy s) {
  return s == Strategy::IMG_FTU || s == Strategy::IMG_HAMFP_FTU || s == Strategy::IMG_HAMPP_FTU;
}

bool strategy_uses_imagenet(Strategy s) {
  return s == Strategy::IMG_WFT || s == Strategy::IMG_FFT || s == Strategy::IMG_FTU ||
         s == Strategy::IMG_HAMFP_FTU || s == Strategy::IMG_HAMPP_FTU;
}

bool strategy_uses_intermediate(Strategy s) {
  return s == Strategy::HAM_FFT || s == Strategy::IMG_HAMFP_FTU ||
         s == Strategy::IMG_HAMPP_FTU;
}

std::string TransferConfig::display_name() const {
  std::string name = backbone + "-" + strategy_name(strategy);
  if (strategy_needs_unfreeze_depth(strategy)) name += "-" + std::to_string(unfreeze_depth);
  return name;
}

void TransferConfig::validate() const {
  const auto& reg = Registry::instance();
  if (!reg.has(backbone))
    fail("unknown backbone '" + backbone + "'; valid names: " + reg.names_joined());
  const int n = reg.descriptor(backbone).total_layers;
  if (strategy_needs_unfreeze_depth(strategy)) {
    // U = 0 is the documented degenerate case: an empty suffix trains only
    // the head, i.e. IMG_WFT behavior
    if (unfreeze_depth < 0 || unfreeze_depth > n)
      fail("strategy " + std::string(strategy_name(strategy)) +
           " requires an unfreeze depth in [0, " + std::to_string(n) + "], got " +
           std::to_string(unfreeze_depth));
  }
}

void TrainingHyperparams::validate() const {
  if (lr_head <= 0 || lr_finetune <= 0) fail("learning rates must be positive");
  if (batch_size < 1) fail("batch size must be >= 1");
  if (early_stop_patience < 1) fail("early stopping patience must be >= 1");
  if (max_epochs < 1 || head_epochs_cap < 1) fail("epoch caps must be >= 1");
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------
namespace {

Model attach_head_impl(Model m, int units, Act out_act, const HeadSpec& head, uint64_t seed) {
  if (m.head_start >= 0) fail("model already has a head attached");
  if (head.dropout_rate < 0.0 || head.dropout_rate >= 1.0)
    fail("dropout rate must be in [0, 1)");
  const int feature_node = m.output_node();

  Layer gap;
  gap.kind = LayerKind::GlobalAvgPool;
  gap.name = "head_gap";
  gap.inputs = {feature_node};
  m.head_start = m.add_layer(gap);

  Layer drop;
  drop.kind = LayerKind::Dropout;
  drop.name = "head_dropout";
  drop.rate = head.dropout_rate;
  drop.inputs = {m.output_node()};
  m.add_layer(drop);

  Layer dense;
  dense.kind = LayerKind::Dense;
  dense.name = "head_dense";
  dense.filters = units;
  dense.use_bias = true;
  dense.inputs = {m.output_node()};
  const int dense_node = m.add_layer(dense);

  Layer out;
  out.kind = LayerKind::Activation;
  out.name = out_act == Act::Sigmoid ? "head_sigmoid" : "head_softmax";
  out.act = out_act;
  out.inputs = {m.output_node()};
  m.add_layer(out);

  // deterministic head init; backbone weights untouched
  Rng rng(substream_seed(seed, "head-init:" + m.backbone_name));
  Layer& d = m.layers[size_t(dense_node)];
  const double fan_in = double(d.weights[0].shape.w);
  const double limit = std::sqrt(6.0 / (fan_in + units));
  for (auto& v : d.weights[0].v) v = float(rng.next_range(-limit, limit));
  d.weights[1].zero();
  return m;
}

}  // namespace

Model attach_head(Model backbone, const HeadSpec& head, uint64_t seed) {
  return attach_head_impl(std::move(backbone), 1, Act::Sigmoid, head, seed);
}

Model attach_softmax_head(Model backbone, int classes, const HeadSpec& head, uint64_t seed) {
  if (classes < 2) fail("softmax head needs at least 2 classes");
  return attach_head_impl(std::move(backbone), classes, Act::Softmax, head, seed);
}

Model strip_head(const Model& model) {
  if (model.head_start < 0) return model;
  Model out;
  out.backbone_name = model.backbone_name;
  out.input_shape = model.input_shape;
  for (int i = 0; i < model.head_start; ++i) out.layers.push_back(model.layers[size_t(i)]);
  return out;
}

void set_unfrozen_suffix(Model& model, int unfreeze_depth) {
  const auto nodes = model.backbone_layer_nodes();
  const int n = int(nodes.size());
  if (unfreeze_depth < 0 || unfreeze_depth > n)
    fail("unfreeze depth " + std::to_string(unfreeze_depth) + " out of [0, " +
         std::to_string(n) + "]");
  for (int i = 0; i < n; ++i)
    model.layers[size_t(nodes[size_t(i)])].trainable = i >= n - unfreeze_depth;
  if (model.head_start >= 0)
    for (int i = model.head_start; i < int(model.layers.size()); ++i)
      model.layers[size_t(i)].trainable = true;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------
int binary_label(const Manifest& m, const std::string& label) {
  if (label == m.class_names[0]) return 1;
  if (label == m.class_names[1]) return 0;
  fail("label '" + label + "' is not one of the manifest classes");
}

namespace {

std::vector<float> image_to_floats(const Image& img, int height, int width) {
  const Image resized =
      (img.height == height && img.width == width) ? img : resize_bilinear(img, width, height);
  std::vector<float> out(size_t(height) * width * 3);
  for (size_t i = 0; i < out.size(); ++i) out[i] = float(resized.px[i]);
  return out;
}

}  // namespace

nn::LabeledImageSet dataset_from_ids(const std::vector<std::string>& ids, const Manifest& m,
                                     int height, int width) {
  nn::LabeledImageSet set;
  set.height = height;
  set.width = width;
  for (const auto& id : ids) {
    const ImageRecord& rec = m.by_id(id);
    Image img;
    try {
      img = load_image(rec.path);
    } catch (const Error& e) {
      fail("cannot load image for id '" + id + "': " + e.what());
    }
    set.push(image_to_floats(img, height, width), binary_label(m, rec.label));
  }
  return set;
}

nn::LabeledImageSet dataset_from_augmented(const AugmentedSet& aug, const Manifest& m,
                                           int height, int width) {
  nn::LabeledImageSet set;
  set.height = height;
  set.width = width;
  for (const auto& item : aug.items) {
    Image img;
    try {
      img = load_image(item.out_path);
    } catch (const Error& e) {
      fail("cannot load augmented image for source '" + item.source_id + "': " + e.what());
    }
    const std::string label =
        item.label.empty() ? m.by_id(item.source_id).label : item.label;
    set.push(image_to_floats(img, height, width), binary_label(m, label));
  }
  return set;
}

PredictionSet predict_set(Model& model, const std::vector<std::string>& ids, const Manifest& m,
                          int batch_size) {
  const nn::LabeledImageSet data =
      dataset_from_ids(ids, m, model.input_shape.h, model.input_shape.w);
  const auto rows = nn::predict(model, data, batch_size);
  PredictionSet p;
  for (size_t i = 0; i < ids.size(); ++i)
    p.entries.push_back({ids[i], data.labels[i], double(rows[i][0])});
  return p;
}

// ---------------------------------------------------------------------------
// Intermediate pretraining
// ---------------------------------------------------------------------------
IntermediateDataset load_intermediate_dataset(const fs::path& root) {
  if (!fs::exists(root) || !fs::is_directory(root))
    fail("intermediate dataset root is not a directory: " + root.string());
  IntermediateDataset ds;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) fail("intermediate dataset needs at least 2 class directories");
  for (const auto& dir : class_dirs) {
    const int cls = int(ds.classes.size());
    ds.classes.push_back(dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.is_regular_file() && looks_like_image(f.path())) files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ds.items.push_back({f.string(), cls});
  }
  if (ds.items.empty()) fail("intermediate dataset has no images");
  return ds;
}

namespace {

// stratified 90/10 split of the intermediate dataset
void split_intermediate(const IntermediateDataset& ds, int height, int width, uint64_t seed,
                        nn::LabeledImageSet* train, nn::LabeledImageSet* val) {
  train->height = val->height = height;
  train->width = val->width = width;
  std::map<int, std::vector<size_t>> per_class;
  for (size_t i = 0; i < ds.items.size(); ++i) per_class[ds.items[i].second].push_back(i);
  for (auto& [cls, idx] : per_class) {
    Rng rng(substream_seed(seed, "intermediate-split:" + std::to_string(cls)));
    rng.shuffle(idx);
    size_t n_val = std::max<size_t>(1, size_t(std::llround(0.10 * double(idx.size()))));
    if (n_val >= idx.size()) n_val = idx.size() - 1;
    for (size_t i = 0; i < idx.size(); ++i) {
      const auto& [path, label] = ds.items[idx[i]];
      Image img;
      try {
        img = load_image(path);
      } catch (const Error& e) {
        fail(std::string("cannot load intermediate image: ") + e.what());
      }
      std::vector<float> flat(size_t(height) * width * 3);
      const Image resized = resize_bilinear(img, width, height);
      for (size_t k = 0; k < flat.size(); ++k) flat[k] = float(resized.px[k]);
      (i < n_val ? val : train)->push(std::move(flat), label);
    }
  }
}

void append_history(std::vector<nn::EpochRecord>* history, const nn::FitResult& fit,
                    int start_epoch) {
  for (const auto& rec : fit.history) {
    nn::EpochRecord r = rec;
    r.epoch = start_epoch + rec.epoch;
    history->push_back(r);
  }
}

}  // namespace

PhaseRecord pretrain_partial(Model& model, int unfreeze_depth, const IntermediateDataset& data,
                             const TrainingHyperparams& hp, uint64_t seed, int start_epoch,
                             std::vector<nn::EpochRecord>* history) {
  hp.validate();
  if (data.items.empty()) fail("intermediate dataset is empty");
  const auto nodes = model.backbone_layer_nodes();
  const int n = int(nodes.size());
  if (unfreeze_depth <= 0 || unfreeze_depth > n)
    fail("pretrain_partial: unfreeze depth out of range");

  // temporary model: backbone subgraph + multi-class softmax head
  Model temp;
  temp.backbone_name = model.backbone_name;
  temp.input_shape = model.input_shape;
  const int end = model.head_start >= 0 ? model.head_start : int(model.layers.size());
  for (int i = 0; i < end; ++i) temp.layers.push_back(model.layers[size_t(i)]);
  temp = attach_softmax_head(std::move(temp), int(data.classes.size()), HeadSpec{},
                             substream_seed(seed, "intermediate-head"));
  set_unfrozen_suffix(temp, unfreeze_depth);

  nn::LabeledImageSet train, val;
  split_intermediate(data, model.input_shape.h, model.input_shape.w,
                     substream_seed(seed, "intermediate"), &train, &val);

  nn::FitConfig fc;
  fc.batch_size = hp.batch_size;
  fc.max_epochs = hp.max_epochs;
  fc.patience = hp.early_stop_patience;
  fc.lr = hp.lr_head;
  fc.loss = nn::LossKind::SoftmaxCE;
  fc.num_classes = int(data.classes.size());
  fc.seed = substream_seed(seed, "intermediate-fit");

  const nn::FitResult fit = nn::fit(temp, train, val, fc);

  // copy the trained backbone weights back; the temporary head is dropped
  for (int i = 0; i < end; ++i) model.layers[size_t(i)].weights = temp.layers[size_t(i)].weights;

  PhaseRecord phase;
  phase.name = unfreeze_depth == n ? "full-intermediate-pretrain" : "partial-intermediate-pretrain";
  phase.lr = hp.lr_head;
  phase.start_epoch = start_epoch;
  phase.epochs = int(fit.history.size());
  phase.best_epoch = start_epoch + fit.best_epoch;
  phase.stopped_early = fit.stopped_early;
  if (history) append_history(history, fit, start_epoch);
  return phase;
}

// ---------------------------------------------------------------------------
// run_configuration
// ---------------------------------------------------------------------------
TrainedModel run_configuration(const TransferConfig& cfg, const SplitAssignment& splits,
                               const AugmentedSet& augmented, const TrainingHyperparams& hp,
                               uint64_t seed, const RunEnv& env) {
  cfg.validate();
  hp.validate();
  if (!env.manifest) fail("run_configuration: manifest is required");
  if (strategy_uses_intermediate(cfg.strategy) && !env.intermediate)
    fail("strategy " + std::string(strategy_name(cfg.strategy)) +
         " requires an intermediate pretraining dataset");

  const auto& reg = Registry::instance();
  const auto& desc = reg.descriptor(cfg.backbone);
  const int n_layers = desc.total_layers;

  const WeightSource source =
      strategy_uses_imagenet(cfg.strategy) ? WeightSource::Imagenet : WeightSource::None;
  Model model = reg.instantiate(cfg.backbone, source, seed, env.weight_store);
  model = attach_head(std::move(model), HeadSpec{}, seed);

  TrainedModel out;
  out.config = cfg;
  out.fold = splits.test_fold;

  const nn::LabeledImageSet train_set =
      dataset_from_augmented(augmented, *env.manifest, desc.input_h, desc.input_w);
  const nn::LabeledImageSet val_set =
      dataset_from_ids(splits.val_ids, *env.manifest, desc.input_h, desc.input_w);
  if (train_set.size() == 0) fail("run_configuration: empty training set");

  int epoch_cursor = 0;

  auto run_phase = [&](const std::string& phase_name, int unfreeze, double lr, int cap) {
    set_unfrozen_suffix(model, unfreeze);
    nn::FitConfig fc;
    fc.batch_size = hp.batch_size;
    fc.max_epochs = cap;
    fc.patience = hp.early_stop_patience;
    fc.lr = lr;
    fc.loss = nn::LossKind::SigmoidBinaryCE;
    fc.seed = substream_seed(seed, "phase:" + phase_name);
    fc.verbose = env.verbose;
    const nn::FitResult fit = nn::fit(model, train_set, val_set, fc);
    PhaseRecord phase;
    phase.name = phase_name;
    phase.lr = lr;
    phase.start_epoch = epoch_cursor;
    phase.epochs = int(fit.history.size());
    phase.best_epoch = epoch_cursor + fit.best_epoch;
    phase.stopped_early = fit.stopped_early;
    append_history(&out.history, fit, epoch_cursor);
    epoch_cursor += phase.epochs;
    out.phases.push_back(phase);
  };

  auto run_intermediate = [&](int unfreeze) {
    PhaseRecord phase = pretrain_partial(model, unfreeze, *env.intermediate, hp,
                                         substream_seed(seed, "intermediate-stage"),
                                         epoch_cursor, &out.history);
    epoch_cursor += phase.epochs;
    out.phases.push_back(phase);
  };

  switch (cfg.strategy) {
    case Strategy::NTL:
      run_phase("full-train", n_layers, hp.lr_finetune, hp.max_epochs);
      break;
    case Strategy::HAM_FFT:
      run_intermediate(n_layers);
      run_phase("full-fine-tune", n_layers, hp.lr_finetune, hp.max_epochs);
      break;
    case Strategy::IMG_WFT:
      run_phase("head-train", 0, hp.lr_head, hp.max_epochs);
      break;
    case Strategy::IMG_FFT:
      run_phase("head-train", 0, hp.lr_head, hp.head_epochs_cap);
      run_phase("full-fine-tune", n_layers, hp.lr_finetune, hp.max_epochs);
      break;
    case Strategy::IMG_FTU:
      run_phase("head-train", 0, hp.lr_head, hp.head_epochs_cap);
      run_phase("suffix-fine-tune", cfg.unfreeze_depth, hp.lr_finetune, hp.max_epochs);
      break;
    case Strategy::IMG_HAMFP_FTU:
      run_intermediate(n_layers);
      run_phase("head-train", 0, hp.lr_head, hp.head_epochs_cap);
      run_phase("suffix-fine-tune", cfg.unfreeze_depth, hp.lr_finetune, hp.max_epochs);
      break;
    case Strategy::IMG_HAMPP_FTU:
      run_intermediate(cfg.unfreeze_depth);
      run_phase("head-train", 0, hp.lr_head, hp.head_epochs_cap);
      run_phase("suffix-fine-tune", cfg.unfreeze_depth, hp.lr_finetune, hp.max_epochs);
      break;
  }

  out.model = std::move(model);
  out.stopped_epoch = epoch_cursor - 1;
  out.best_epoch = -1;
  double best = -1.0;
  for (const auto& rec : out.history) {
    if (rec.val_acc > best) {
      best = rec.val_acc;
      out.best_epoch = rec.epoch;
    }
  }
  return out;
}

UnfreezeSearchResult search_unfreeze_depth(Strategy strategy, const std::string& backbone,
                                           const std::vector<int>& candidate_depths,
                                           const SplitAssignment& splits,
                                           const AugmentedSet& augmented,
                                           const TrainingHyperparams& hp, uint64_t seed,
                                           const RunEnv& env) {
  if (candidate_depths.empty()) fail("search_unfreeze_depth: empty candidate list");
  UnfreezeSearchResult result;
  double best_acc = -1.0;
  for (int depth : candidate_depths) {
    TransferConfig cfg;
    cfg.strategy = strategy;
    cfg.backbone = backbone;
    cfg.unfreeze_depth = depth;
    try {
      const TrainedModel tm = run_configuration(cfg, splits, augmented, hp, seed, env);
      double acc = 0.0;
      for (const auto& rec : tm.history) acc = std::max(acc, rec.val_acc);
      result.candidate_val_acc.push_back({depth, acc});
      // strict > keeps the smaller depth on ties (candidates tried in order)
      if (acc > best_acc ||
          (acc == best_acc && result.best_depth >= 0 && depth < result.best_depth)) {
        best_acc = acc;
        result.best_depth = depth;
      }
    } catch (const Error& e) {
      result.failures.push_back({depth, e.what()});
    }
  }
  if (result.candidate_val_acc.empty())
    fail("search_unfreeze_depth: every candidate failed; first error: " +
         result.failures.front().second);
  return result;
}

}  // namespace lymebench::transfer
