// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tensor.hpp"

#include <cmath>
#include <sstream>

#include "common.hpp"

namespace rfsep::nn {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<Scalar> data) : shape(std::move(s)), v(std::move(data)) {
  if (static_cast<int64_t>(v.size()) != numel(shape))
    throw UsageError("tensor: data size does not match shape " + shape_str(shape));
}

Tensor Tensor::full(Shape s, Scalar value) {
  Tensor t(std::move(s));
  for (auto& x : t.v) x = value;
  return t;
}

Scalar& Tensor::at(std::initializer_list<int> idx) {
  int64_t off = 0;
  size_t k = 0;
  for (int i : idx) {
    off = off * shape[k] + i;
    ++k;
  }
  return v[static_cast<size_t>(off)];
}

Scalar Tensor::at(std::initializer_list<int> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

bool Tensor::all_finite() const {
  for (Scalar x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace rfsep::nn
