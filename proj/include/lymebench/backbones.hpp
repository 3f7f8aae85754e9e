#pragma once

#include <string>
#include <vector>

#include "lymebench/common.hpp"
#include "lymebench/nn/model.hpp"

namespace lymebench::backbones {

enum class WeightSource { None, Imagenet };

struct BackboneDescriptor {
  std::string name;
  int input_h = 224, input_w = 224;  // canonical H x W x 3
  int total_layers = 0;              // N per this registry's flattened layer list
  int feature_channels = 0;          // C at the head attachment point
  nn::PreprocessMode preprocess = nn::PreprocessMode::None;
  long long params = 0;              // backbone parameters (no head)
  bool test_scale = false;           // compact architecture meant for pipeline checks
};

// Structural registry of the supported feature extractors. Each entry builds
// the full layer graph (connectivity + hyperparameters, a saved-model
// manifest in code form); downstream code consumes the graph generically and
// never special-cases an architecture. Pretrained weights are supplied as
// .lbw blobs in a weight-store directory; without one, models start from a
// deterministic random init.
class Registry {
 public:
  static const Registry& instance();

  std::vector<std::string> names() const;
  bool has(const std::string& name) const;
  const BackboneDescriptor& descriptor(const std::string& name) const;

  // The architecture graph with allocated, zeroed weights (headless).
  nn::Model build(const std::string& name) const;

  // WeightSource::Imagenet loads <weight_store>/<name>.lbw and fails if the
  // blob is missing; WeightSource::None draws the deterministic random init.
  nn::Model instantiate(const std::string& name, WeightSource source, uint64_t seed,
                        const fs::path& weight_store = {}) const;

  // Smallest registered backbone by parameter count.
  std::string smallest() const;

  std::string names_joined() const;

 private:
  Registry();
  struct Entry;
  std::vector<Entry>* entries_;
  const Entry& entry(const std::string& name) const;
};

std::string weight_source_name(WeightSource s);
WeightSource weight_source_from_name(const std::string& s);

}  // namespace lymebench::backbones
