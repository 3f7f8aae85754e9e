#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lymebench/augment.hpp"
#include "lymebench/backbones.hpp"
#include "lymebench/folds.hpp"
#include "lymebench/manifest.hpp"
#include "lymebench/metrics.hpp"
#include "lymebench/nn/train.hpp"

namespace lymebench::transfer {

enum class Strategy {
  NTL,            // train from scratch, no transfer
  HAM_FFT,        // intermediate-dataset pretraining of everything, then full fine-tune
  IMG_WFT,        // pretrained backbone frozen, train the head only
  IMG_FFT,        // head phase, then fine-tune all layers
  IMG_FTU,        // head phase, then fine-tune the last U layers
  IMG_HAMFP_FTU,  // full intermediate pretrain, head phase, last-U fine-tune
  IMG_HAMPP_FTU,  // partial (last-U) intermediate pretrain, head phase, last-U fine-tune
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const std::vector<Strategy>& all_strategies();

bool strategy_needs_unfreeze_depth(Strategy s);
bool strategy_uses_imagenet(Strategy s);
bool strategy_uses_intermediate(Strategy s);

struct HeadSpec {
  double dropout_rate = 0.2;  // GAP -> dropout -> 1 sigmoid unit
};

struct TransferConfig {
  Strategy strategy = Strategy::IMG_WFT;
  std::string backbone;
  int unfreeze_depth = -1;  // U; required for the *FTU strategies

  std::string display_name() const;  // e.g. ResNet50-IMG_FTU-141
  void validate() const;
};

struct TrainingHyperparams {
  double beta1 = 0.9, beta2 = 0.999;
  double lr_head = 1e-4;
  double lr_finetune = 1e-5;
  int batch_size = 32;
  int early_stop_patience = 10;
  int max_epochs = 200;      // cap for terminal training phases
  int head_epochs_cap = 50;  // cap for a head phase that precedes fine-tuning

  void validate() const;
};

struct PhaseRecord {
  std::string name;
  double lr = 0.0;
  int start_epoch = 0;  // global epoch index of the phase's first epoch
  int epochs = 0;
  int best_epoch = -1;  // global index of the phase's best validation epoch
  bool stopped_early = false;
};

struct TrainedModel {
  nn::Model model;
  TransferConfig config;
  int fold = -1;
  std::vector<nn::EpochRecord> history;  // concatenated phases, global epoch numbers
  std::vector<PhaseRecord> phases;
  int best_epoch = -1;     // global argmax of validation accuracy
  int stopped_epoch = -1;  // last executed global epoch
};

// A multi-class image collection for the intermediate pretraining stage
// (one subdirectory per class).
struct IntermediateDataset {
  std::vector<std::string> classes;
  std::vector<std::pair<std::string, int>> items;  // path, class index
};
IntermediateDataset load_intermediate_dataset(const fs::path& root);

struct RunEnv {
  const Manifest* manifest = nullptr;
  const IntermediateDataset* intermediate = nullptr;  // HAM-style strategies
  fs::path weight_store;                              // IMG strategies
  bool verbose = false;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Backbone minus its classifier, plus GAP -> dropout -> 1-unit sigmoid.
// Head parameters = C + 1.
nn::Model attach_head(nn::Model backbone, const HeadSpec& head, uint64_t seed);

// Temporary multi-class variant used by the intermediate pretraining stage.
nn::Model attach_softmax_head(nn::Model backbone, int classes, const HeadSpec& head,
                              uint64_t seed);

// The backbone subgraph with its current weights (e.g. for exporting a
// fine-tuned feature extractor into a weight store).
nn::Model strip_head(const nn::Model& model);

// Exactly the last U backbone layers (canonical ordering) plus the head are
// trainable; frozen batch-norm layers stop updating their statistics.
void set_unfrozen_suffix(nn::Model& model, int unfreeze_depth);

// Trains the last U backbone layers (plus a temporary softmax head, discarded
// afterwards) on the intermediate dataset. The first N-U layers come back
// bitwise unchanged.
PhaseRecord pretrain_partial(nn::Model& model, int unfreeze_depth,
                             const IntermediateDataset& data, const TrainingHyperparams& hp,
                             uint64_t seed, int start_epoch,
                             std::vector<nn::EpochRecord>* history);

// Executes the strategy's full staging for one fold rotation.
TrainedModel run_configuration(const TransferConfig& cfg, const SplitAssignment& splits,
                               const AugmentedSet& augmented, const TrainingHyperparams& hp,
                               uint64_t seed, const RunEnv& env);

struct UnfreezeSearchResult {
  int best_depth = -1;
  std::vector<std::pair<int, double>> candidate_val_acc;  // (U, best val accuracy)
  std::vector<std::pair<int, std::string>> failures;      // (U, error)
};

// One run per candidate U on the same split; highest validation accuracy
// wins, ties break toward the smaller depth.
UnfreezeSearchResult search_unfreeze_depth(Strategy strategy, const std::string& backbone,
                                           const std::vector<int>& candidate_depths,
                                           const SplitAssignment& splits,
                                           const AugmentedSet& augmented,
                                           const TrainingHyperparams& hp, uint64_t seed,
                                           const RunEnv& env);

// ---------------------------------------------------------------------------
// Helpers shared with the CLI / result store
// ---------------------------------------------------------------------------

// Binary label: 1 for the manifest's positive (first) class.
int binary_label(const Manifest& m, const std::string& label);

// Loads + resizes images for the model input; raw [0,255] floats.
nn::LabeledImageSet dataset_from_ids(const std::vector<std::string>& ids, const Manifest& m,
                                     int height, int width);
nn::LabeledImageSet dataset_from_augmented(const AugmentedSet& set, const Manifest& m,
                                           int height, int width);

// Test-fold predictions of a trained model.
PredictionSet predict_set(nn::Model& model, const std::vector<std::string>& ids,
                          const Manifest& m, int batch_size = 32);

}  // namespace lymebench::transfer
