// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "common.hpp"

namespace rfsep::nn {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

CMatMap cmap(const Tensor& t, int64_t rows, int64_t cols) {
  return CMatMap(t.data(), rows, cols);
}
MatMap mmap(Tensor& t, int64_t rows, int64_t cols) { return MatMap(t.data(), rows, cols); }

VarPtr make_node(Tape* t, Tensor val, std::vector<VarPtr> parents,
                 std::function<void(Var&)> backward) {
  auto v = std::make_shared<Var>();
  v->val = std::move(val);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  if (t != nullptr && rg) {
    v->requires_grad = true;
    v->parents = std::move(parents);
    v->backward = std::move(backward);
    t->record(v);
  }
  return v;
}

void check_same_shape(const VarPtr& a, const VarPtr& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a->val.shape) + " vs " +
                     shape_str(b->val.shape));
}

}  // namespace

Tensor& Var::g() {
  if (grad.v.empty()) grad = Tensor(val.shape);
  return grad;
}

VarPtr constant(Tensor t) {
  auto v = std::make_shared<Var>();
  v->val = std::move(t);
  return v;
}

VarPtr parameter(Tensor t) {
  auto v = std::make_shared<Var>();
  v->val = std::move(t);
  v->requires_grad = true;
  return v;
}

void Tape::backward(const VarPtr& root) {
  if (root->val.size() != 1) throw UsageError("backward: root must be a scalar");
  root->g().v[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Var& n = **it;
    if (n.backward && !n.grad.v.empty()) n.backward(n);
  }
}

SamePad same_pad(int in, int kernel, int stride) {
  int out = (in + stride - 1) / stride;
  int total = std::max((out - 1) * stride + kernel - in, 0);
  return {out, total / 2, total - total / 2};
}

// ---------------------------------------------------------------- elementwise

VarPtr add(Tape* t, VarPtr a, VarPtr b) {
  check_same_shape(a, b, "add");
  Tensor out = a->val;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
  return make_node(t, std::move(out), {a, b}, [a, b](Var& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (int64_t i = 0; i < ga.size(); ++i) ga.v[i] += n.grad.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t i = 0; i < gb.size(); ++i) gb.v[i] += n.grad.v[i];
    }
  });
}

VarPtr sub(Tape* t, VarPtr a, VarPtr b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->val;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
  return make_node(t, std::move(out), {a, b}, [a, b](Var& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (int64_t i = 0; i < ga.size(); ++i) ga.v[i] += n.grad.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t i = 0; i < gb.size(); ++i) gb.v[i] -= n.grad.v[i];
    }
  });
}

VarPtr mul(Tape* t, VarPtr a, VarPtr b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->val;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
  return make_node(t, std::move(out), {a, b}, [a, b](Var& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (int64_t i = 0; i < ga.size(); ++i) ga.v[i] += n.grad.v[i] * b->val.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t i = 0; i < gb.size(); ++i) gb.v[i] += n.grad.v[i] * a->val.v[i];
    }
  });
}

VarPtr scale(Tape* t, VarPtr a, Scalar c) {
  Tensor out = a->val;
  for (auto& x : out.v) x *= c;
  return make_node(t, std::move(out), {a}, [a, c](Var& n) {
    Tensor& ga = a->g();
    for (int64_t i = 0; i < ga.size(); ++i) ga.v[i] += c * n.grad.v[i];
  });
}

VarPtr add_broadcast(Tape* t, VarPtr x, VarPtr y) {
  int64_t ny = y->val.size();
  int64_t nx = x->val.size();
  if (ny == 0 || nx % ny != 0)
    throw UsageError("add_broadcast: " + shape_str(y->val.shape) + " does not tile " +
                     shape_str(x->val.shape));
  Tensor out = x->val;
  for (int64_t i = 0; i < nx; ++i) out.v[i] += y->val.v[i % ny];
  return make_node(t, std::move(out), {x, y}, [x, y, nx, ny](Var& n) {
    if (x->requires_grad) {
      Tensor& gx = x->g();
      for (int64_t i = 0; i < nx; ++i) gx.v[i] += n.grad.v[i];
    }
    if (y->requires_grad) {
      Tensor& gy = y->g();
      for (int64_t i = 0; i < nx; ++i) gy.v[i % ny] += n.grad.v[i];
    }
  });
}

namespace {

template <class F, class DF>
VarPtr unary_op(Tape* t, VarPtr x, F f, DF df_from_xy) {
  Tensor out = x->val;
  for (auto& v : out.v) v = f(v);
  Tensor saved = out;  // most activations differentiate via their output
  return make_node(t, std::move(out), {x}, [x, saved, df_from_xy](Var& n) {
    Tensor& gx = x->g();
    for (int64_t i = 0; i < gx.size(); ++i)
      gx.v[i] += n.grad.v[i] * df_from_xy(x->val.v[i], saved.v[i]);
  });
}

}  // namespace

VarPtr relu(Tape* t, VarPtr x) {
  return unary_op(
      t, x, [](Scalar v) { return v > 0 ? v : 0.0; },
      [](Scalar xi, Scalar) { return xi > 0 ? 1.0 : 0.0; });
}

VarPtr tanh_op(Tape* t, VarPtr x) {
  return unary_op(
      t, x, [](Scalar v) { return std::tanh(v); },
      [](Scalar, Scalar yi) { return 1.0 - yi * yi; });
}

VarPtr sigmoid_op(Tape* t, VarPtr x) {
  return unary_op(
      t, x, [](Scalar v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](Scalar, Scalar yi) { return yi * (1.0 - yi); });
}

VarPtr sin_op(Tape* t, VarPtr x) {
  return unary_op(
      t, x, [](Scalar v) { return std::sin(v); },
      [](Scalar xi, Scalar) { return std::cos(xi); });
}

VarPtr cos_op(Tape* t, VarPtr x) {
  return unary_op(
      t, x, [](Scalar v) { return std::cos(v); },
      [](Scalar xi, Scalar) { return -std::sin(xi); });
}

VarPtr exp10_op(Tape* t, VarPtr x) {
  constexpr Scalar ln10 = 2.302585092994045684;
  return unary_op(
      t, x, [](Scalar v) { return std::pow(10.0, v); },
      [](Scalar, Scalar yi) { return ln10 * yi; });
}

VarPtr dropout(Tape* t, VarPtr x, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return x;  // inference applies identity scaling
  Tensor mask(x->val.shape);
  const Scalar keep = 1.0 - rate;
  for (auto& m : mask.v) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = x->val;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= mask.v[i];
  return make_node(t, std::move(out), {x}, [x, mask](Var& n) {
    Tensor& gx = x->g();
    for (int64_t i = 0; i < gx.size(); ++i) gx.v[i] += n.grad.v[i] * mask.v[i];
  });
}

// --------------------------------------------------------------------- shape

VarPtr reshape(Tape* t, VarPtr x, Shape s) {
  if (numel(s) != x->val.size())
    throw UsageError("reshape: cannot view " + shape_str(x->val.shape) + " as " + shape_str(s));
  Tensor out(std::move(s), x->val.v);
  return make_node(t, std::move(out), {x}, [x](Var& n) {
    Tensor& gx = x->g();
    for (int64_t i = 0; i < gx.size(); ++i) gx.v[i] += n.grad.v[i];
  });
}

namespace {

std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return st;
}

// dst[i] = src[map_index(i)] where the mapping permutes axes.
void permute_copy(const Tensor& src, Tensor& dst, const std::vector<int>& perm) {
  const auto src_st = row_major_strides(src.shape);
  const int r = dst.rank();
  std::vector<int64_t> dst_src_stride(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i)
    dst_src_stride[static_cast<size_t>(i)] = src_st[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  std::vector<int> idx(static_cast<size_t>(r), 0);
  int64_t src_off = 0;
  for (int64_t o = 0; o < dst.size(); ++o) {
    dst.v[static_cast<size_t>(o)] = src.v[static_cast<size_t>(src_off)];
    for (int d = r - 1; d >= 0; --d) {
      auto du = static_cast<size_t>(d);
      if (++idx[du] < dst.shape[du]) {
        src_off += dst_src_stride[du];
        break;
      }
      idx[du] = 0;
      src_off -= dst_src_stride[du] * (dst.shape[du] - 1);
    }
  }
}

}  // namespace

VarPtr permute(Tape* t, VarPtr x, std::vector<int> perm) {
  const int r = x->val.rank();
  if (static_cast<int>(perm.size()) != r) throw UsageError("permute: rank mismatch");
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i)
    out_shape[static_cast<size_t>(i)] = x->val.shape[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  Tensor out(out_shape);
  permute_copy(x->val, out, perm);
  std::vector<int> inv(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) inv[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;
  return make_node(t, std::move(out), {x}, [x, inv](Var& n) {
    Tensor gperm(x->val.shape);
    permute_copy(n.grad, gperm, inv);
    Tensor& gx = x->g();
    for (int64_t i = 0; i < gx.size(); ++i) gx.v[i] += gperm.v[i];
  });
}

VarPtr pad2d(Tape* t, VarPtr x, int top, int bottom, int left, int right) {
  if (x->val.rank() != 3) throw UsageError("pad2d: expected [H,W,C]");
  const int H = x->val.dim(0), W = x->val.dim(1), C = x->val.dim(2);
  const int OH = H + top + bottom, OW = W + left + right;
  Tensor out({OH, OW, C});
  for (int h = 0; h < H; ++h)
    std::copy_n(&x->val.v[static_cast<size_t>(h) * W * C], static_cast<size_t>(W) * C,
                &out.v[(static_cast<size_t>(h + top) * OW + static_cast<size_t>(left)) * C]);
  return make_node(t, std::move(out), {x}, [x, top, left, H, W, C](Var& n) {
    Tensor& gx = x->g();
    const int OW = n.grad.dim(1);
    for (int h = 0; h < H; ++h) {
      const Scalar* src = &n.grad.v[(static_cast<size_t>(h + top) * OW + static_cast<size_t>(left)) * C];
      Scalar* dst = &gx.v[static_cast<size_t>(h) * W * C];
      for (int64_t i = 0; i < static_cast<int64_t>(W) * C; ++i) dst[i] += src[i];
    }
  });
}

VarPtr crop2d(Tape* t, VarPtr x, int top, int bottom, int left, int right) {
  if (x->val.rank() != 3) throw UsageError("crop2d: expected [H,W,C]");
  const int H = x->val.dim(0), W = x->val.dim(1), C = x->val.dim(2);
  const int OH = H - top - bottom, OW = W - left - right;
  if (OH <= 0 || OW <= 0) throw UsageError("crop2d: crop exceeds extent");
  Tensor out({OH, OW, C});
  for (int h = 0; h < OH; ++h)
    std::copy_n(&x->val.v[(static_cast<size_t>(h + top) * W + static_cast<size_t>(left)) * C],
                static_cast<size_t>(OW) * C, &out.v[static_cast<size_t>(h) * OW * C]);
  return make_node(t, std::move(out), {x}, [x, top, left, OH, OW, C](Var& n) {
    Tensor& gx = x->g();
    const int W = x->val.dim(1);
    for (int h = 0; h < OH; ++h) {
      const Scalar* src = &n.grad.v[static_cast<size_t>(h) * OW * C];
      Scalar* dst = &gx.v[(static_cast<size_t>(h + top) * W + static_cast<size_t>(left)) * C];
      for (int64_t i = 0; i < static_cast<int64_t>(OW) * C; ++i) dst[i] += src[i];
    }
  });
}

VarPtr select_channel(Tape* t, VarPtr x, int c) {
  const int C = x->val.shape.back();
  if (c < 0 || c >= C) throw UsageError("select_channel: index out of range");
  Shape os(x->val.shape.begin(), x->val.shape.end() - 1);
  const int64_t P = numel(os);
  Tensor out(os);
  for (int64_t p = 0; p < P; ++p) out.v[p] = x->val.v[p * C + c];
  return make_node(t, std::move(out), {x}, [x, c, C, P](Var& n) {
    Tensor& gx = x->g();
    for (int64_t p = 0; p < P; ++p) gx.v[p * C + c] += n.grad.v[p];
  });
}

// ------------------------------------------------------------ linear algebra

VarPtr linear(Tape* t, VarPtr x, VarPtr w, VarPtr b) {
  const int K = w->val.dim(0), M = w->val.dim(1);
  if (x->val.shape.back() != K)
    throw UsageError("linear: inner dim mismatch " + shape_str(x->val.shape) + " vs " +
                     shape_str(w->val.shape));
  const int64_t P = x->val.size() / K;
  Shape os(x->val.shape.begin(), x->val.shape.end() - 1);
  os.push_back(M);
  Tensor out(os);
  mmap(out, P, M).noalias() = cmap(x->val, P, K) * cmap(w->val, K, M);
  if (b) {
    if (b->val.size() != M) throw UsageError("linear: bias size mismatch");
    for (int64_t p = 0; p < P; ++p)
      for (int m = 0; m < M; ++m) out.v[p * M + m] += b->val.v[static_cast<size_t>(m)];
  }
  std::vector<VarPtr> parents = {x, w};
  if (b) parents.push_back(b);
  return make_node(t, std::move(out), std::move(parents), [x, w, b, P, K, M](Var& n) {
    CMatMap gy(n.grad.data(), P, M);
    if (x->requires_grad) mmap(x->g(), P, K).noalias() += gy * cmap(w->val, K, M).transpose();
    if (w->requires_grad) mmap(w->g(), K, M).noalias() += cmap(x->val, P, K).transpose() * gy;
    if (b && b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t p = 0; p < P; ++p)
        for (int m = 0; m < M; ++m) gb.v[static_cast<size_t>(m)] += n.grad.v[p * M + m];
    }
  });
}

VarPtr bmm(Tape* t, VarPtr a, VarPtr b, bool ta, bool tb) {
  if (a->val.rank() != 3 || b->val.rank() != 3 || a->val.dim(0) != b->val.dim(0))
    throw UsageError("bmm: expected [G,·,·] pair");
  const int G = a->val.dim(0);
  const int m = ta ? a->val.dim(2) : a->val.dim(1);
  const int k = ta ? a->val.dim(1) : a->val.dim(2);
  const int kb = tb ? b->val.dim(2) : b->val.dim(1);
  const int nn = tb ? b->val.dim(1) : b->val.dim(2);
  if (k != kb) throw UsageError("bmm: inner dim mismatch");
  Tensor out({G, m, nn});
  const int64_t sa = static_cast<int64_t>(a->val.dim(1)) * a->val.dim(2);
  const int64_t sb = static_cast<int64_t>(b->val.dim(1)) * b->val.dim(2);
  const int64_t so = static_cast<int64_t>(m) * nn;
  for (int g = 0; g < G; ++g) {
    CMatMap A(a->val.data() + g * sa, a->val.dim(1), a->val.dim(2));
    CMatMap B(b->val.data() + g * sb, b->val.dim(1), b->val.dim(2));
    MatMap O(out.data() + g * so, m, nn);
    if (!ta && !tb) O.noalias() = A * B;
    else if (!ta && tb) O.noalias() = A * B.transpose();
    else if (ta && !tb) O.noalias() = A.transpose() * B;
    else O.noalias() = A.transpose() * B.transpose();
  }
  return make_node(t, std::move(out), {a, b}, [a, b, ta, tb, G, m, nn, sa, sb, so](Var& n) {
    for (int g = 0; g < G; ++g) {
      CMatMap A(a->val.data() + g * sa, a->val.dim(1), a->val.dim(2));
      CMatMap B(b->val.data() + g * sb, b->val.dim(1), b->val.dim(2));
      CMatMap Gy(n.grad.data() + g * so, m, nn);
      if (a->requires_grad) {
        MatMap Ga(a->g().data() + g * sa, a->val.dim(1), a->val.dim(2));
        // dA' = Gy * B'^T with A' = op(A); transpose back if needed
        if (!ta && !tb) Ga.noalias() += Gy * B.transpose();
        else if (!ta && tb) Ga.noalias() += Gy * B;
        else if (ta && !tb) Ga.noalias() += B * Gy.transpose();
        else Ga.noalias() += B.transpose() * Gy.transpose();
      }
      if (b->requires_grad) {
        MatMap Gb(b->g().data() + g * sb, b->val.dim(1), b->val.dim(2));
        if (!ta && !tb) Gb.noalias() += A.transpose() * Gy;
        else if (!ta && tb) Gb.noalias() += Gy.transpose() * A;
        else if (ta && !tb) Gb.noalias() += A * Gy;
        else Gb.noalias() += Gy.transpose() * A.transpose();
      }
    }
  });
}

VarPtr softmax_last(Tape* t, VarPtr x) {
  const int N = x->val.shape.back();
  const int64_t R = x->val.size() / N;
  Tensor out = x->val;
  for (int64_t r = 0; r < R; ++r) {
    Scalar* row = &out.v[static_cast<size_t>(r) * N];
    Scalar mx = row[0];
    for (int i = 1; i < N; ++i) mx = std::max(mx, row[i]);
    Scalar sum = 0;
    for (int i = 0; i < N; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (int i = 0; i < N; ++i) row[i] /= sum;
  }
  Tensor y = out;
  return make_node(t, std::move(out), {x}, [x, y, R, N](Var& n) {
    Tensor& gx = x->g();
    for (int64_t r = 0; r < R; ++r) {
      const Scalar* yr = &y.v[static_cast<size_t>(r) * N];
      const Scalar* gr = &n.grad.v[static_cast<size_t>(r) * N];
      Scalar dotgy = 0;
      for (int i = 0; i < N; ++i) dotgy += gr[i] * yr[i];
      Scalar* gxr = &gx.v[static_cast<size_t>(r) * N];
      for (int i = 0; i < N; ++i) gxr[i] += yr[i] * (gr[i] - dotgy);
    }
  });
}

VarPtr layernorm_last(Tape* t, VarPtr x, VarPtr gain, VarPtr bias, Scalar eps) {
  const int N = x->val.shape.back();
  if (gain->val.size() != N || bias->val.size() != N)
    throw UsageError("layernorm: gain/bias must have the normalized size");
  const int64_t R = x->val.size() / N;
  Tensor xhat(x->val.shape);
  Tensor inv({static_cast<int>(R)});
  Tensor out(x->val.shape);
  for (int64_t r = 0; r < R; ++r) {
    const Scalar* xr = &x->val.v[static_cast<size_t>(r) * N];
    Scalar mu = 0;
    for (int i = 0; i < N; ++i) mu += xr[i];
    mu /= N;
    Scalar var = 0;
    for (int i = 0; i < N; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= N;
    const Scalar iv = 1.0 / std::sqrt(var + eps);
    inv.v[static_cast<size_t>(r)] = iv;
    Scalar* hr = &xhat.v[static_cast<size_t>(r) * N];
    Scalar* yr = &out.v[static_cast<size_t>(r) * N];
    for (int i = 0; i < N; ++i) {
      hr[i] = (xr[i] - mu) * iv;
      yr[i] = gain->val.v[static_cast<size_t>(i)] * hr[i] + bias->val.v[static_cast<size_t>(i)];
    }
  }
  return make_node(t, std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv, R, N](Var& n) {
    for (int64_t r = 0; r < R; ++r) {
      const Scalar* gr = &n.grad.v[static_cast<size_t>(r) * N];
      const Scalar* hr = &xhat.v[static_cast<size_t>(r) * N];
      if (x->requires_grad) {
        const Scalar iv = inv.v[static_cast<size_t>(r)];
        Scalar sum1 = 0, sum2 = 0;
        for (int i = 0; i < N; ++i) {
          const Scalar gh = gr[i] * gain->val.v[static_cast<size_t>(i)];
          sum1 += gh;
          sum2 += gh * hr[i];
        }
        Scalar* gxr = &x->g().v[static_cast<size_t>(r) * N];
        for (int i = 0; i < N; ++i) {
          const Scalar gh = gr[i] * gain->val.v[static_cast<size_t>(i)];
          gxr[i] += iv * (gh - sum1 / N - hr[i] * sum2 / N);
        }
      }
      if (gain->requires_grad) {
        Tensor& gg = gain->g();
        for (int i = 0; i < N; ++i) gg.v[static_cast<size_t>(i)] += gr[i] * hr[i];
      }
      if (bias->requires_grad) {
        Tensor& gb = bias->g();
        for (int i = 0; i < N; ++i) gb.v[static_cast<size_t>(i)] += gr[i];
      }
    }
  });
}

// --------------------------------------------------------------- convolution

VarPtr depthwise_conv2d(Tape* t, VarPtr x, VarPtr k, int sh, int sw) {
  if (x->val.rank() != 3 || k->val.rank() != 3 || x->val.dim(2) != k->val.dim(2))
    throw UsageError("depthwise_conv2d: expected x[H,W,C], k[kh,kw,C]");
  const int H = x->val.dim(0), W = x->val.dim(1), C = x->val.dim(2);
  const int kh = k->val.dim(0), kw = k->val.dim(1);
  const auto ph = same_pad(H, kh, sh), pw = same_pad(W, kw, sw);
  const int OH = ph.out, OW = pw.out;
  Tensor out({OH, OW, C});
  for (int oh = 0; oh < OH; ++oh) {
    for (int i = 0; i < kh; ++i) {
      const int ih = oh * sh + i - ph.pad_lo;
      if (ih < 0 || ih >= H) continue;
      for (int ow = 0; ow < OW; ++ow) {
        Scalar* orow = &out.v[(static_cast<size_t>(oh) * OW + static_cast<size_t>(ow)) * C];
        for (int j = 0; j < kw; ++j) {
          const int iw = ow * sw + j - pw.pad_lo;
          if (iw < 0 || iw >= W) continue;
          const Scalar* xrow = &x->val.v[(static_cast<size_t>(ih) * W + static_cast<size_t>(iw)) * C];
          const Scalar* krow = &k->val.v[(static_cast<size_t>(i) * kw + static_cast<size_t>(j)) * C];
          for (int c = 0; c < C; ++c) orow[c] += xrow[c] * krow[c];
        }
      }
    }
  }
  return make_node(t, std::move(out), {x, k}, [x, k, sh, sw, H, W, C, kh, kw, ph, pw](Var& n) {
    const int OH = ph.out, OW = pw.out;
    for (int oh = 0; oh < OH; ++oh) {
      for (int i = 0; i < kh; ++i) {
        const int ih = oh * sh + i - ph.pad_lo;
        if (ih < 0 || ih >= H) continue;
        for (int ow = 0; ow < OW; ++ow) {
          const Scalar* grow = &n.grad.v[(static_cast<size_t>(oh) * OW + static_cast<size_t>(ow)) * C];
          for (int j = 0; j < kw; ++j) {
            const int iw = ow * sw + j - pw.pad_lo;
            if (iw < 0 || iw >= W) continue;
            const size_t xoff = (static_cast<size_t>(ih) * W + static_cast<size_t>(iw)) * C;
            const size_t koff = (static_cast<size_t>(i) * kw + static_cast<size_t>(j)) * C;
            if (x->requires_grad) {
              Scalar* gx = &x->g().v[xoff];
              const Scalar* kr = &k->val.v[koff];
              for (int c = 0; c < C; ++c) gx[c] += grow[c] * kr[c];
            }
            if (k->requires_grad) {
              Scalar* gk = &k->g().v[koff];
              const Scalar* xr = &x->val.v[xoff];
              for (int c = 0; c < C; ++c) gk[c] += grow[c] * xr[c];
            }
          }
        }
      }
    }
  });
}

VarPtr conv2d_transpose(Tape* t, VarPtr x, VarPtr k, VarPtr b, int sh, int sw) {
  if (x->val.rank() != 3 || k->val.rank() != 4 || x->val.dim(2) != k->val.dim(2))
    throw UsageError("conv2d_transpose: expected x[H,W,Ci], k[kh,kw,Ci,Co]");
  const int H = x->val.dim(0), W = x->val.dim(1), Ci = x->val.dim(2);
  const int kh = k->val.dim(0), kw = k->val.dim(1), Co = k->val.dim(3);
  const int OH = H * sh, OW = W * sw;
  // Padding of the conv that this op transposes (maps OH -> H).
  const int pt = same_pad(OH, kh, sh).pad_lo;
  const int pl = same_pad(OW, kw, sw).pad_lo;
  Tensor out({OH, OW, Co});
  const int64_t P = static_cast<int64_t>(H) * W;
  Tensor tap({static_cast<int>(P), Co});
  for (int i = 0; i < kh; ++i) {
    for (int j = 0; j < kw; ++j) {
      CMatMap K(k->val.data() + (static_cast<int64_t>(i) * kw + j) * Ci * Co, Ci, Co);
      mmap(tap, P, Co).noalias() = cmap(x->val, P, Ci) * K;
      for (int h = 0; h < H; ++h) {
        const int oh = h * sh + i - pt;
        if (oh < 0 || oh >= OH) continue;
        for (int w = 0; w < W; ++w) {
          const int ow = w * sw + j - pl;
          if (ow < 0 || ow >= OW) continue;
          Scalar* orow = &out.v[(static_cast<size_t>(oh) * OW + static_cast<size_t>(ow)) * Co];
          const Scalar* trow = &tap.v[(static_cast<size_t>(h) * W + static_cast<size_t>(w)) * Co];
          for (int c = 0; c < Co; ++c) orow[c] += trow[c];
        }
      }
    }
  }
  if (b) {
    if (b->val.size() != Co) throw UsageError("conv2d_transpose: bias size mismatch");
    for (int64_t p = 0; p < static_cast<int64_t>(OH) * OW; ++p)
      for (int c = 0; c < Co; ++c) out.v[p * Co + c] += b->val.v[static_cast<size_t>(c)];
  }
  std::vector<VarPtr> parents = {x, k};
  if (b) parents.push_back(b);
  return make_node(t, std::move(out), std::move(parents),
                   [x, k, b, sh, sw, H, W, Ci, kh, kw, Co, pt, pl](Var& n) {
    const int OH = H * sh, OW = W * sw;
    const int64_t P = static_cast<int64_t>(H) * W;
    Tensor gathered({static_cast<int>(P), Co});
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        std::fill(gathered.v.begin(), gathered.v.end(), 0.0);
        for (int h = 0; h < H; ++h) {
          const int oh = h * sh + i - pt;
          if (oh < 0 || oh >= OH) continue;
          for (int w = 0; w < W; ++w) {
            const int ow = w * sw + j - pl;
            if (ow < 0 || ow >= OW) continue;
            std::copy_n(&n.grad.v[(static_cast<size_t>(oh) * OW + static_cast<size_t>(ow)) * Co], Co,
                        &gathered.v[(static_cast<size_t>(h) * W + static_cast<size_t>(w)) * Co]);
          }
        }
        const int64_t koff = (static_cast<int64_t>(i) * kw + j) * Ci * Co;
        if (x->requires_grad) {
          CMatMap K(k->val.data() + koff, Ci, Co);
          mmap(x->g(), P, Ci).noalias() += cmap(gathered, P, Co) * K.transpose();
        }
        if (k->requires_grad) {
          MatMap GK(k->g().data() + koff, Ci, Co);
          GK.noalias() += cmap(x->val, P, Ci).transpose() * cmap(gathered, P, Co);
        }
      }
    }
    if (b && b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t p = 0; p < static_cast<int64_t>(OH) * OW; ++p)
        for (int c = 0; c < Co; ++c) gb.v[static_cast<size_t>(c)] += n.grad.v[p * Co + c];
    }
  });
}

// ------------------------------------------------------------------- scalars

VarPtr dot(Tape* t, VarPtr a, VarPtr b) {
  check_same_shape(a, b, "dot");
  Scalar s = 0;
  for (int64_t i = 0; i < a->val.size(); ++i) s += a->val.v[i] * b->val.v[i];
  Tensor out({1});
  out.v[0] = s;
  return make_node(t, std::move(out), {a, b}, [a, b](Var& n) {
    const Scalar g0 = n.grad.v[0];
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (int64_t i = 0; i < ga.size(); ++i) ga.v[i] += g0 * b->val.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (int64_t i = 0; i < gb.size(); ++i) gb.v[i] += g0 * a->val.v[i];
    }
  });
}

VarPtr add_scalars(Tape* t, const std::vector<VarPtr>& xs) {
  if (xs.empty()) throw UsageError("add_scalars: empty list");
  Tensor out({1});
  for (const auto& x : xs) {
    if (x->val.size() != 1) throw UsageError("add_scalars: non-scalar input");
    out.v[0] += x->val.v[0];
  }
  return make_node(t, std::move(out), xs, [xs](Var& n) {
    for (const auto& x : xs)
      if (x->requires_grad) x->g().v[0] += n.grad.v[0];
  });
}

VarPtr log10_clamped(Tape* t, VarPtr x, Scalar clamp_lo) {
  constexpr Scalar ln10 = 2.302585092994045684;
  Tensor out = x->val;
  for (auto& v : out.v) v = std::log10(std::max(v, clamp_lo));
  return make_node(t, std::move(out), {x}, [x, clamp_lo](Var& n) {
    Tensor& gx = x->g();
    for (int64_t i = 0; i < gx.size(); ++i) {
      const Scalar xv = x->val.v[i];
      if (xv > clamp_lo) gx.v[i] += n.grad.v[i] / (xv * ln10);
    }
  });
}

}  // namespace rfsep::nn
