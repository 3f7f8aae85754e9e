#include "lymebench/backbones.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "builder.hpp"

namespace lymebench::backbones {

struct Registry::Entry {
  BackboneDescriptor desc;
  std::function<nn::Model()> builder;
};

Registry::Registry() {
  static std::vector<Entry> entries;
  entries_ = &entries;
  auto reg = [&](const std::string& name, std::function<nn::Model()> b) {
    Entry e;
    nn::Model probe = b();
    e.desc.name = name;
    e.desc.input_h = probe.input_shape.h;
    e.desc.input_w = probe.input_shape.w;
    e.desc.total_layers = probe.backbone_layer_count();
    e.desc.feature_channels = probe.output().out.c;
    e.desc.preprocess = probe.layers[1].preprocess;
    e.desc.params = probe.total_params();
    e.desc.test_scale = name.starts_with("MicroCNN");
    e.builder = std::move(b);
    entries.push_back(std::move(e));
  };
  reg("VGG16", [] { return build_vgg("VGG16"); });
  reg("VGG19", [] { return build_vgg("VGG19"); });
  reg("ResNet50", [] { return build_resnet("ResNet50"); });
  reg("ResNet101", [] { return build_resnet("ResNet101"); });
  reg("ResNet50V2", [] { return build_resnet("ResNet50V2"); });
  reg("ResNet101V2", [] { return build_resnet("ResNet101V2"); });
  reg("InceptionV3", [] { return build_inception_v3(); });
  reg("InceptionV4", [] { return build_inception_v4(); });
  reg("InceptionResNetV2", [] { return build_inception_resnet_v2(); });
  reg("Xception", [] { return build_xception(); });
  reg("DenseNet121", [] { return build_densenet("DenseNet121"); });
  reg("DenseNet169", [] { return build_densenet("DenseNet169"); });
  reg("DenseNet201", [] { return build_densenet("DenseNet201"); });
  reg("MobileNetV2", [] { return build_mobilenet_v2(); });
  reg("MobileNetV3Small", [] { return build_mobilenet_v3("MobileNetV3Small"); });
  reg("MobileNetV3Large", [] { return build_mobilenet_v3("MobileNetV3Large"); });
  reg("NASNetMobile", [] { return build_nasnet_mobile(); });
  reg("EfficientNetB0", [] { return build_efficientnet("EfficientNetB0"); });
  reg("EfficientNetB1", [] { return build_efficientnet("EfficientNetB1"); });
  reg("EfficientNetB2", [] { return build_efficientnet("EfficientNetB2"); });
  reg("EfficientNetB3", [] { return build_efficientnet("EfficientNetB3"); });
  reg("EfficientNetB4", [] { return build_efficientnet("EfficientNetB4"); });
  reg("EfficientNetB5", [] { return build_efficientnet("EfficientNetB5"); });
  reg("MicroCNN32", [] { return build_microcnn("MicroCNN32"); });
  reg("MicroCNN64", [] { return build_microcnn("MicroCNN64"); });
}

const Registry& Registry::instance() {
  static Registry registry;
  return registry;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& e : *entries_) out.push_back(e.desc.name);
  return out;
}

bool Registry::has(const std::string& name) const {
  return std::any_of(entries_->begin(), entries_->end(),
                     [&](const Entry& e) { return e.desc.name == name; });
}

const Registry::Entry& Registry::entry(const std::string& name) const {
  for (const auto& e : *entries_)
    if (e.desc.name == name) return e;
  fail("unknown backbone '" + name + "'; valid names: " + names_joined());
}

std::string Registry::names_joined() const {
  std::string s;
  for (const auto& e : *entries_) {
    if (!s.empty()) s += ", ";
    s += e.desc.name;
  }
  return s;
}

const BackboneDescriptor& Registry::descriptor(const std::string& name) const {
  return entry(name).desc;
}

nn::Model Registry::build(const std::string& name) const { return entry(name).builder(); }

nn::Model Registry::instantiate(const std::string& name, WeightSource source, uint64_t seed,
                                const fs::path& weight_store) const {
  nn::Model m = build(name);
  if (source == WeightSource::None) {
    m.init_weights(substream_seed(seed, "backbone:" + name));
    return m;
  }
  const fs::path blob = weight_store / (name + ".lbw");
  if (weight_store.empty() || !fs::exists(blob))
    fail("pretrained weights for '" + name + "' not found (expected " + blob.string() +
         "); provide a weight store or use weight source 'none'");
  m.init_weights(substream_seed(seed, "backbone:" + name));
  m.load_weights(blob);
  return m;
}

std::string Registry::smallest() const {
  const Entry* best = nullptr;
  for (const auto& e : *entries_)
    if (!best || e.desc.params < best->desc.params) best = &e;
  return best->desc.name;
}

std::string weight_source_name(WeightSource s) {
  return s == WeightSource::Imagenet ? "imagenet" : "none";
}

WeightSource weight_source_from_name(const std::string& s) {
  if (s == "imagenet") return WeightSource::Imagenet;
  if (s == "none") return WeightSource::None;
  fail("unknown weight source: " + s + " (expected 'imagenet' or 'none')");
}

}  // namespace lymebench::backbones
