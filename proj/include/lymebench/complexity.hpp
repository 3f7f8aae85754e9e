#pragma once

#include <string>
#include <vector>

#include "lymebench/common.hpp"
#include "lymebench/nn/train.hpp"

namespace lymebench::profile {

struct ComplexityReport {
  std::string model_name;
  double params_millions = 0.0;
  double flops_giga = 0.0;
  double train_sec_per_epoch = 0.0;       // mean of the timed epochs
  double disk_megabytes = 0.0;            // serialized weights blob
  double accel_memory_megabytes = 0.0;    // resident tensor bytes after load
  double inference_sec_per_image = 0.0;   // mean of the timed single-image passes
  int input_h = 0, input_w = 0;
  std::vector<double> epoch_seconds;      // raw timing log
  std::vector<double> inference_seconds;  // raw timing log
  bool timing_variance_warning = false;
};

// Trainable + non-trainable parameters, head included.
long long count_params(const nn::Model& model);

// Analytic forward-pass count at batch size one. Convention: convolutions and
// dense layers cost 2 ops per multiply-accumulate (+1 per bias add); the
// secondary table for normalization/activation/pooling ops is documented in
// flop_convention_notes().
long long count_flops(const nn::Model& model);

std::string flop_convention_notes();

struct RuntimeProfileOptions {
  int inference_reps = 300;
  int warmup_reps = 10;
  int train_epochs = 3;
  int batch_size = 8;
  double variance_warning_ratio = 0.25;  // stdev/mean above this flags the report
};

// Timing + memory part of the report. The training stream is iterated with
// the model's current trainable configuration (set the unfreeze state first).
ComplexityReport measure_runtime_profile(nn::Model& model,
                                         const nn::LabeledImageSet& train_stream,
                                         const std::vector<float>& probe_image,
                                         const RuntimeProfileOptions& opts = {});

// Structural part only (no timing); cheap enough for all registered backbones.
ComplexityReport structural_report(const nn::Model& model);

void write_complexity_csv(const fs::path& path, const std::vector<ComplexityReport>& reports);
std::vector<ComplexityReport> read_complexity_csv(const fs::path& path);

}  // namespace lymebench::profile
