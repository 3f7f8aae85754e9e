#include <doctest.h>

#include "lymebench/backbones.hpp"
#include "lymebench/complexity.hpp"
#include "lymebench/transfer.hpp"
#include "helpers.hpp"

using namespace lymebench;
using backbones::Registry;

namespace {

nn::Model toy_dense_model() {
  nn::Model m;
  m.input_shape = {1, 1, 1, 10};
  nn::Layer in;
  in.kind = nn::LayerKind::Input;
  in.name = "input";
  m.add_layer(in);
  nn::Layer fc;
  fc.kind = nn::LayerKind::Dense;
  fc.name = "fc";
  fc.filters = 1;
  fc.inputs = {0};
  m.add_layer(fc);
  return m;
}

nn::Model toy_conv_model() {
  nn::Model m;
  m.input_shape = {1, 1, 1, 1};
  nn::Layer in;
  in.kind = nn::LayerKind::Input;
  in.name = "input";
  m.add_layer(in);
  nn::Layer c;
  c.kind = nn::LayerKind::Conv2D;
  c.name = "conv";
  c.filters = 1;
  c.kernel_h = c.kernel_w = 1;
  c.padding = nn::Padding::Valid;
  c.inputs = {0};
  m.add_layer(c);
  return m;
}

}  // namespace

TEST_CASE("a 10->1 dense layer with bias counts 11 parameters") {
  CHECK(profile::count_params(toy_dense_model()) == 11);
}

TEST_CASE("a 1x1 conv on a 1x1 single-channel input costs 3 flops") {
  // one multiply + one add (the MAC pair) + one bias add
  CHECK(profile::count_flops(toy_conv_model()) == 3);
}

TEST_CASE("structural counts are bit-identical across runs") {
  const auto& reg = Registry::instance();
  nn::Model a = transfer::attach_head(reg.build("MobileNetV2"), transfer::HeadSpec{}, 0);
  nn::Model b = transfer::attach_head(reg.build("MobileNetV2"), transfer::HeadSpec{}, 1);
  CHECK(profile::count_params(a) == profile::count_params(b));
  CHECK(profile::count_flops(a) == profile::count_flops(b));
}

TEST_CASE("flops are non-decreasing across the scaled family at its table shapes") {
  const auto& reg = Registry::instance();
  long long prev = 0;
  for (const auto& name : {"EfficientNetB0", "EfficientNetB1", "EfficientNetB2",
                           "EfficientNetB3", "EfficientNetB4", "EfficientNetB5"}) {
    nn::Model m = transfer::attach_head(reg.build(name), transfer::HeadSpec{}, 0);
    const long long flops = profile::count_flops(m);
    CHECK(flops >= prev);
    prev = flops;
  }
}

TEST_CASE("runtime profile records the requested log sizes and footprints") {
  const auto& reg = Registry::instance();
  nn::Model m = transfer::attach_head(reg.instantiate("MicroCNN32",
                                                      backbones::WeightSource::None, 3),
                                      transfer::HeadSpec{}, 3);
  transfer::set_unfrozen_suffix(m, reg.descriptor("MicroCNN32").total_layers);

  nn::LabeledImageSet stream = testutil::shape_set(4, 32, 50);
  std::vector<float> probe(32 * 32 * 3, 100.0f);

  profile::RuntimeProfileOptions opts;
  opts.inference_reps = 300;
  opts.warmup_reps = 10;
  opts.train_epochs = 3;
  opts.batch_size = 4;
  const profile::ComplexityReport r = profile::measure_runtime_profile(m, stream, probe, opts);

  CHECK(r.inference_seconds.size() == 300);  // raw log keeps every timed repetition
  CHECK(r.epoch_seconds.size() == 3);
  CHECK(r.inference_sec_per_image > 0.0);
  CHECK(r.train_sec_per_epoch > 0.0);
  CHECK(r.accel_memory_megabytes > 0.0);
  CHECK(r.params_millions == doctest::Approx(double(m.total_params()) / 1e6));

  // the mean contract over the raw log
  double sum = 0.0;
  for (double s : r.inference_seconds) sum += s;
  CHECK(r.inference_sec_per_image == doctest::Approx(sum / 300.0).epsilon(1e-12));

  // disk usage equals the serialized blob's byte length / 2^20
  const auto dir = testutil::fresh_dir("complexity_disk");
  m.save_weights(dir / "w.lbw");
  CHECK(r.disk_megabytes ==
        doctest::Approx(double(fs::file_size(dir / "w.lbw")) / (1024.0 * 1024.0))
            .epsilon(1e-9));
}

TEST_CASE("complexity csv round-trips with the documented columns") {
  const auto& reg = Registry::instance();
  std::vector<profile::ComplexityReport> reports;
  for (const auto& name : {"MicroCNN32", "MobileNetV2"}) {
    nn::Model m = transfer::attach_head(reg.build(name), transfer::HeadSpec{}, 0);
    profile::ComplexityReport r = profile::structural_report(m);
    r.model_name = name;
    reports.push_back(std::move(r));
  }
  const auto dir = testutil::fresh_dir("complexity_csv");
  profile::write_complexity_csv(dir / "complexity.csv", reports);
  const auto lines = read_lines(dir / "complexity.csv");
  CHECK(lines[0] ==
        "model,params_millions,flops_giga,train_sec_per_epoch,disk_mb,accel_mem_mb,"
        "inference_sec,input_shape");
  const auto back = profile::read_complexity_csv(dir / "complexity.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].model_name == "MobileNetV2");
  CHECK(back[1].params_millions == doctest::Approx(reports[1].params_millions).epsilon(1e-3));
  CHECK(back[1].input_h == 224);
}
