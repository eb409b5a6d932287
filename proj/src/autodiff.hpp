// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_AUTODIFF_HPP
#define RFSEP_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace rfsep::nn {

// Reverse-mode autodiff over a per-step tape. Ops compute eagerly; when a
// Tape is supplied and an input requires gradients, a backward closure is
// recorded. Passing tape == nullptr runs inference without bookkeeping.
struct Var {
  Tensor val;
  Tensor grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Var>> parents;
  std::function<void(Var&)> backward;

  Tensor& g();  // grad, allocated on first touch
};

using VarPtr = std::shared_ptr<Var>;

VarPtr constant(Tensor t);
VarPtr parameter(Tensor t);  // requires_grad leaf

class Tape {
 public:
  void record(VarPtr v) { nodes_.push_back(std::move(v)); }
  // Seeds d(root)/d(root) = 1 and runs all recorded closures in reverse.
  void backward(const VarPtr& root);
  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<VarPtr> nodes_;
};

// ---- elementwise / broadcast ----
VarPtr add(Tape* t, VarPtr a, VarPtr b);
VarPtr sub(Tape* t, VarPtr a, VarPtr b);
VarPtr mul(Tape* t, VarPtr a, VarPtr b);
VarPtr scale(Tape* t, VarPtr a, Scalar c);
// y shape must be a trailing suffix of x shape; broadcast over leading dims.
VarPtr add_broadcast(Tape* t, VarPtr x, VarPtr y);
VarPtr relu(Tape* t, VarPtr x);
VarPtr tanh_op(Tape* t, VarPtr x);
VarPtr sigmoid_op(Tape* t, VarPtr x);
VarPtr sin_op(Tape* t, VarPtr x);
VarPtr cos_op(Tape* t, VarPtr x);
VarPtr exp10_op(Tape* t, VarPtr x);
VarPtr dropout(Tape* t, VarPtr x, double rate, Rng& rng, bool training);

// ---- shape ----
VarPtr reshape(Tape* t, VarPtr x, Shape s);
VarPtr permute(Tape* t, VarPtr x, std::vector<int> perm);
// Zero padding / cropping on the two leading spatial dims of [H,W,C].
VarPtr pad2d(Tape* t, VarPtr x, int top, int bottom, int left, int right);
VarPtr crop2d(Tape* t, VarPtr x, int top, int bottom, int left, int right);
VarPtr select_channel(Tape* t, VarPtr x, int c);  // [..,C] -> [..]

// ---- linear algebra ----
// x: [..., K] folded to [P, K]; w: [K, M]; optional bias [M].
VarPtr linear(Tape* t, VarPtr x, VarPtr w, VarPtr b);
// Batched matmul: a [G,m,k], b [G,k,n] (transpose flags apply per batch).
VarPtr bmm(Tape* t, VarPtr a, VarPtr b, bool ta, bool tb);
VarPtr softmax_last(Tape* t, VarPtr x);
VarPtr layernorm_last(Tape* t, VarPtr x, VarPtr gain, VarPtr bias, Scalar eps);

// ---- convolution (NHWC, TF "same" padding) ----
// Depthwise 2-D conv, kernel [kh,kw,C], stride (sh,sw).
VarPtr depthwise_conv2d(Tape* t, VarPtr x, VarPtr k, int sh, int sw);
// Transposed 2-D conv, kernel [kh,kw,Cin,Cout], output H*sh x W*sw.
VarPtr conv2d_transpose(Tape* t, VarPtr x, VarPtr k, VarPtr b, int sh, int sw);

// ---- reductions / scalars (shape {1}) ----
VarPtr dot(Tape* t, VarPtr a, VarPtr b);
VarPtr add_scalars(Tape* t, const std::vector<VarPtr>& xs);
// log10(max(x, clamp_lo)); gradient is zero in the clamped region.
VarPtr log10_clamped(Tape* t, VarPtr x, Scalar clamp_lo);

// TF "same" output size and top/left padding for a given input extent.
struct SamePad {
  int out, pad_lo, pad_hi;
};
SamePad same_pad(int in, int kernel, int stride);

}  // namespace rfsep::nn

#endif
