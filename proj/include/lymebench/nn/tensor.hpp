#pragma once

#include <cstddef>
#include <vector>

#include "lymebench/common.hpp"

namespace lymebench::nn {

// NHWC everywhere; flat vectors are [n,1,1,c]. Default is the empty shape so
// an unallocated tensor never compares equal to a real one.
struct Shape {
  int n = 0, h = 0, w = 0, c = 0;

  size_t count() const { return size_t(n) * h * w * c; }
  size_t per_item() const { return size_t(h) * w * c; }
  bool operator==(const Shape&) const = default;
};

struct Tensor {
  Shape shape;
  std::vector<float> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(s.count(), 0.0f) {}
  Tensor(int n, int h, int w, int c) : Tensor(Shape{n, h, w, c}) {}

  float& at(int in, int iy, int ix, int ic) {
    return v[((size_t(in) * shape.h + iy) * shape.w + ix) * shape.c + ic];
  }
  float at(int in, int iy, int ix, int ic) const {
    return v[((size_t(in) * shape.h + iy) * shape.w + ix) * shape.c + ic];
  }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0f); }
  bool empty() const { return v.empty(); }
};

// FNV over the raw float bytes; used by the frozen-region bitwise checks.
uint64_t tensor_checksum(const Tensor& t);

}  // namespace lymebench::nn
