#include <doctest.h>

#include "lymebench/backbones.hpp"
#include "lymebench/transfer.hpp"
#include "helpers.hpp"

using namespace lymebench;
using backbones::Registry;
using backbones::WeightSource;

namespace {

struct Published {
  const char* name;
  long long params;   // reference no-top totals for the pretrained families
  double tolerance;   // relative; the Inception variants differ by the
                      // scale-free batch-norm bookkeeping (<0.2%)
};

constexpr Published kPublished[] = {
    {"VGG16", 14714688LL, 0.0},
    {"VGG19", 20024384LL, 0.0},
    {"ResNet50", 23587712LL, 0.0},
    {"ResNet101", 42658176LL, 0.0},
    {"ResNet50V2", 23564800LL, 0.0},
    {"ResNet101V2", 42626560LL, 0.0},
    {"InceptionV3", 21802784LL, 0.002},
    {"InceptionV4", 41145888LL, 0.002},
    {"InceptionResNetV2", 54336736LL, 0.002},
    {"Xception", 20861480LL, 0.0},
    {"DenseNet121", 7037504LL, 0.0},
    {"DenseNet169", 12642880LL, 0.0},
    {"DenseNet201", 18321984LL, 0.0},
    {"MobileNetV2", 2257984LL, 0.0},
    {"MobileNetV3Small", 1529968LL, 0.0},
    {"MobileNetV3Large", 4226432LL, 0.0},
    {"NASNetMobile", 4269716LL, 0.0},
    {"EfficientNetB0", 4049564LL, 0.0},
    {"EfficientNetB1", 6575232LL, 0.0},
    {"EfficientNetB2", 7768562LL, 0.0},
    {"EfficientNetB3", 10783528LL, 0.0},
    {"EfficientNetB4", 17673816LL, 0.0},
    {"EfficientNetB5", 28513520LL, 0.0},
};

}  // namespace

TEST_CASE("backbone parameter counts match the published reference totals") {
  const auto& reg = Registry::instance();
  for (const auto& want : kPublished) {
    const auto& desc = reg.descriptor(want.name);
    INFO(want.name << " built " << desc.params << " expected " << want.params);
    if (want.tolerance == 0.0) {
      CHECK(desc.params == want.params);
    } else {
      CHECK(std::abs(double(desc.params) - double(want.params)) <=
            want.tolerance * double(want.params));
    }
  }
}

TEST_CASE("descriptors expose the complexity table's input shapes") {
  const auto& reg = Registry::instance();
  CHECK(reg.descriptor("VGG16").input_h == 224);
  CHECK(reg.descriptor("InceptionV4").input_h == 299);
  CHECK(reg.descriptor("InceptionResNetV2").input_h == 299);
  CHECK(reg.descriptor("Xception").input_h == 299);
  CHECK(reg.descriptor("EfficientNetB1").input_h == 240);
  CHECK(reg.descriptor("EfficientNetB2").input_h == 260);
  CHECK(reg.descriptor("EfficientNetB3").input_h == 300);
  CHECK(reg.descriptor("EfficientNetB4").input_h == 380);
  CHECK(reg.descriptor("EfficientNetB5").input_h == 456);
  CHECK(reg.descriptor("ResNet50").feature_channels == 2048);
  CHECK(reg.descriptor("EfficientNetB0").feature_channels == 1280);
  CHECK(reg.descriptor("DenseNet121").feature_channels == 1024);
  CHECK(reg.descriptor("MobileNetV3Small").feature_channels == 1024);
  for (const auto& name : reg.names()) {
    const auto& d = reg.descriptor(name);
    CHECK(d.total_layers > 0);
    CHECK(d.feature_channels > 0);
  }
}

TEST_CASE("the classifier head adds exactly C + 1 parameters to every backbone") {
  const auto& reg = Registry::instance();
  for (const auto& name : reg.names()) {
    const auto& desc = reg.descriptor(name);
    nn::Model with_head = transfer::attach_head(reg.build(name), transfer::HeadSpec{}, 0);
    CHECK(with_head.total_params() - desc.params == desc.feature_channels + 1);
  }
}

TEST_CASE("unknown names fail with the list of valid names") {
  const auto& reg = Registry::instance();
  CHECK_THROWS_WITH_AS(reg.descriptor("ResNet51"), doctest::Contains("ResNet50"), Error);
  CHECK_THROWS_WITH_AS(reg.build("NotANet"), doctest::Contains("valid names"), Error);
}

TEST_CASE("instantiation is deterministic per seed and weight source") {
  const auto& reg = Registry::instance();
  nn::Model a = reg.instantiate("MicroCNN32", WeightSource::None, 7);
  nn::Model b = reg.instantiate("MicroCNN32", WeightSource::None, 7);
  nn::Model c = reg.instantiate("MicroCNN32", WeightSource::None, 8);
  CHECK(a.weights_checksum(0, -1) == b.weights_checksum(0, -1));
  CHECK(a.weights_checksum(0, -1) != c.weights_checksum(0, -1));
}

TEST_CASE("pretrained weights require a weight-store blob") {
  const auto& reg = Registry::instance();
  CHECK_THROWS_WITH_AS(reg.instantiate("MicroCNN32", WeightSource::Imagenet, 1,
                                       "test_tmp/empty_store"),
                       doctest::Contains("not found"), Error);

  const auto store = testutil::fresh_dir("backbone_store");
  nn::Model donor = reg.instantiate("MicroCNN32", WeightSource::None, 123);
  donor.save_weights(store / "MicroCNN32.lbw");
  nn::Model loaded = reg.instantiate("MicroCNN32", WeightSource::Imagenet, 9, store);
  CHECK(loaded.weights_checksum(0, -1) == donor.weights_checksum(0, -1));
}

TEST_CASE("the smallest registered backbone is the compact test net") {
  CHECK(Registry::instance().smallest() == "MicroCNN32");
}

TEST_CASE("forward shapes: the large nets end at the expected spatial grid") {
  const auto& reg = Registry::instance();
  // stride-32 families end at 7x7 for a 224 input
  for (const auto& name : {"ResNet50", "MobileNetV2", "EfficientNetB0", "DenseNet121"}) {
    nn::Model m = reg.build(name);
    CHECK(m.output().out.h == 7);
    CHECK(m.output().out.w == 7);
  }
  CHECK(reg.build("MicroCNN32").output().out.h == 8);
}
