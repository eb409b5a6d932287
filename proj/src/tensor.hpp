// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_TENSOR_HPP
#define RFSEP_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace rfsep::nn {

using Scalar = double;
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles. Checkpoints store float32; the in-memory
// math runs in double so finite-difference checks stay well-conditioned.
struct Tensor {
  Shape shape;
  std::vector<Scalar> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), v(numel(shape), 0.0) {}
  Tensor(Shape s, std::vector<Scalar> data);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, Scalar value);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(v.size()); }
  Scalar* data() { return v.data(); }
  const Scalar* data() const { return v.data(); }

  Scalar& at(std::initializer_list<int> idx);
  Scalar at(std::initializer_list<int> idx) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

}  // namespace rfsep::nn

#endif
