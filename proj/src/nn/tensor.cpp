#include "lymebench/nn/tensor.hpp"

namespace lymebench::nn {

uint64_t tensor_checksum(const Tensor& t) {
  const char* bytes = reinterpret_cast<const char*>(t.v.data());
  return fnv1a64(std::string_view(bytes, t.v.size() * sizeof(float)));
}

}  // namespace lymebench::nn
