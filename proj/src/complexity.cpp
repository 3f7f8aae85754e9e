#include "lymebench/complexity.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace lymebench::profile {

using nn::Act;
using nn::Layer;
using nn::LayerKind;
using nn::Model;

long long count_params(const Model& model) { return model.total_params(); }

namespace {

long long act_flops_per_element(Act a) {
  switch (a) {
    case Act::Linear: return 0;
    case Act::Relu: return 1;
    case Act::Relu6: return 1;
    case Act::Sigmoid: return 4;
    case Act::Softmax: return 5;
    case Act::Swish: return 5;
    case Act::HardSwish: return 4;
    case Act::HardSigmoid: return 3;
  }
  return 0;
}

long long layer_flops(const Model& model, const Layer& l) {
  const auto in_shape = [&](size_t i) { return model.layers[size_t(l.inputs[i])].out; };
  const long long out_elems = (long long)l.out.per_item();
  switch (l.kind) {
    case LayerKind::Input:
    case LayerKind::Concat:
    case LayerKind::ZeroPad:
    case LayerKind::Crop:
    case LayerKind::Dropout:
      return 0;
    case LayerKind::Preprocess:
      return 2 * out_elems;
    case LayerKind::Conv2D: {
      const long long cin = in_shape(0).c;
      const long long macs = 2LL * l.kernel_h * l.kernel_w * cin * l.out.c * l.out.h * l.out.w;
      return macs + (l.use_bias ? out_elems : 0);
    }
    case LayerKind::DepthwiseConv2D: {
      const long long macs = 2LL * l.kernel_h * l.kernel_w * l.out.c * l.out.h * l.out.w;
      return macs + (l.use_bias ? out_elems : 0);
    }
    case LayerKind::Dense: {
      const long long cin = in_shape(0).c;
      return 2LL * cin * l.out.c + (l.use_bias ? l.out.c : 0);
    }
    case LayerKind::BatchNorm:
      return 2 * out_elems;  // scale + shift in inference form
    case LayerKind::Activation:
      return act_flops_per_element(l.act) * out_elems;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      return (long long)l.kernel_h * l.kernel_w * out_elems;
    case LayerKind::GlobalAvgPool:
      return (long long)in_shape(0).per_item();
    case LayerKind::Add:
      return (long long)(l.inputs.size() - 1) * out_elems;
    case LayerKind::Multiply:
      return out_elems;
  }
  return 0;
}

}  // namespace

long long count_flops(const Model& model) {
  if (model.input_shape.h <= 0 || model.input_shape.w <= 0)
    fail("count_flops: model has no static input shape");
  long long total = 0;
  for (const auto& l : model.layers) total += layer_flops(model, l);
  return total;
}

std::string flop_convention_notes() {
  return "flops counted for one forward pass at batch size 1; "
         "conv/dense/depthwise = 2 per multiply-accumulate (+1 per bias add); "
         "batch_norm 2/elem (inference scale+shift); preprocess 2/elem; "
         "relu/relu6 1/elem; sigmoid 4/elem; swish 5/elem; hard_swish 4/elem; "
         "hard_sigmoid 3/elem; softmax 5/elem; max/avg pool = window size per "
         "output element; global pool 1 per input element; add/multiply 1/elem; "
         "concat/pad/crop/dropout free";
}

ComplexityReport structural_report(const Model& model) {
  ComplexityReport r;
  r.model_name = model.backbone_name;
  r.params_millions = double(count_params(model)) / 1e6;
  r.flops_giga = double(count_flops(model)) / 1e9;
  r.input_h = model.input_shape.h;
  r.input_w = model.input_shape.w;
  return r;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

double stdev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(v.size() - 1));
}

}  // namespace

ComplexityReport measure_runtime_profile(Model& model, const nn::LabeledImageSet& train_stream,
                                         const std::vector<float>& probe_image,
                                         const RuntimeProfileOptions& opts) {
  using clock = std::chrono::steady_clock;
  if (probe_image.size() != model.input_shape.per_item())
    fail("measure_runtime_profile: probe image does not match the model input shape");

  ComplexityReport r = structural_report(model);

  // disk footprint of the serialized weights
  const fs::path tmp = fs::temp_directory_path() / ("lymebench_profile_" +
                                                    std::to_string(uint64_t(&model)) + ".lbw");
  model.save_weights(tmp);
  r.disk_megabytes = double(fs::file_size(tmp)) / (1024.0 * 1024.0);
  fs::remove(tmp);

  // resident memory: weights plus the batch-1 activation workspace
  Model::Workspace ws;
  nn::Tensor probe(1, model.input_shape.h, model.input_shape.w, 3);
  std::copy(probe_image.begin(), probe_image.end(), probe.v.begin());
  model.forward(probe, ws);
  long long bytes = 0;
  for (const auto& l : model.layers)
    for (const auto& w : l.weights) bytes += (long long)w.size() * 4;
  for (const auto& a : ws.act) bytes += (long long)a.size() * 4;
  r.accel_memory_megabytes = double(bytes) / (1024.0 * 1024.0);

  // inference timing: warm-up passes excluded from the log
  for (int i = 0; i < opts.warmup_reps; ++i) model.forward(probe, ws);
  for (int i = 0; i < opts.inference_reps; ++i) {
    const auto t0 = clock::now();
    model.forward(probe, ws);
    const auto t1 = clock::now();
    r.inference_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  r.inference_sec_per_image = mean_of(r.inference_seconds);

  // training timing over the provided stream, current trainable configuration
  if (train_stream.size() > 0) {
    nn::FitConfig fc;
    fc.batch_size = opts.batch_size;
    fc.max_epochs = 1;
    fc.patience = 1;
    fc.lr = 1e-5;
    fc.loss = model.output().act == nn::Act::Softmax ? nn::LossKind::SoftmaxCE
                                                     : nn::LossKind::SigmoidBinaryCE;
    for (int e = 0; e < opts.train_epochs; ++e) {
      fc.seed = substream_seed(12345, "profile-epoch:" + std::to_string(e));
      const auto t0 = clock::now();
      nn::fit(model, train_stream, train_stream, fc);
      const auto t1 = clock::now();
      r.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    r.train_sec_per_epoch = mean_of(r.epoch_seconds);
  }

  const double imean = r.inference_sec_per_image;
  if (imean > 0.0 &&
      stdev_of(r.inference_seconds, imean) / imean > opts.variance_warning_ratio)
    r.timing_variance_warning = true;
  return r;
}

void write_complexity_csv(const fs::path& path, const std::vector<ComplexityReport>& reports) {
  std::ostringstream out;
  out << "model,params_millions,flops_giga,train_sec_per_epoch,disk_mb,accel_mem_mb,"
         "inference_sec,input_shape\n";
  for (const auto& r : reports) {
    out << csv_escape(r.model_name) << ',' << fmt_double(r.params_millions, 4) << ','
        << fmt_double(r.flops_giga, 4) << ',' << fmt_double(r.train_sec_per_epoch, 4) << ','
        << fmt_double(r.disk_megabytes, 2) << ',' << fmt_double(r.accel_memory_megabytes, 2)
        << ',' << fmt_double(r.inference_sec_per_image, 6) << ',' << r.input_h << 'x'
        << r.input_w << "x3\n";
  }
  write_text_file(path, out.str());
}

std::vector<ComplexityReport> read_complexity_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() ||
      lines[0] !=
          "model,params_millions,flops_giga,train_sec_per_epoch,disk_mb,accel_mem_mb,"
          "inference_sec,input_shape")
    fail("unexpected complexity csv header in " + path.string());
  std::vector<ComplexityReport> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 8) fail("bad complexity csv row in " + path.string());
    ComplexityReport r;
    r.model_name = f[0];
    r.params_millions = std::stod(f[1]);
    r.flops_giga = std::stod(f[2]);
    r.train_sec_per_epoch = std::stod(f[3]);
    r.disk_megabytes = std::stod(f[4]);
    r.accel_memory_megabytes = std::stod(f[5]);
    r.inference_sec_per_image = std::stod(f[6]);
    if (std::sscanf(f[7].c_str(), "%dx%dx3", &r.input_h, &r.input_w) != 2)
      fail("bad input shape in complexity csv: " + f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lymebench::profile
