// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>

#include "autodiff.hpp"
#include "test_util.hpp"

using namespace rfsep::nn;
using rfsep::Rng;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

namespace {

// Collapse any tensor to a scalar with fixed random weights so FD checks can
// probe non-scalar ops.
VarPtr weigh(Tape* t, VarPtr x, uint64_t seed) {
  Rng rng(seed);
  Tensor w(x->val.shape);
  for (auto& v : w.v) v = rng.uniform(-1.0, 1.0);
  return dot(t, x, constant(std::move(w)));
}

}  // namespace

TEST_CASE("autodiff: elementwise and broadcast ops match finite differences") {
  Rng rng(11);
  auto a = parameter(random_tensor({3, 4}, rng));
  auto b = parameter(random_tensor({3, 4}, rng));
  auto y = parameter(random_tensor({4}, rng));

  CHECK(fd_max_rel_err({a, b}, [&](Tape* t) {
          return weigh(t, mul(t, add(t, a, b), sub(t, a, b)), 1);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({a, y}, [&](Tape* t) {
          return weigh(t, add_broadcast(t, scale(t, a, 1.7), y), 2);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({a}, [&](Tape* t) {
          return weigh(t, tanh_op(t, sigmoid_op(t, a)), 3);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({a}, [&](Tape* t) {
          return weigh(t, mul(t, sin_op(t, a), cos_op(t, a)), 4);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({a}, [&](Tape* t) { return weigh(t, exp10_op(t, a), 5); }, rng) < 1e-6);
}

TEST_CASE("autodiff: relu gradient away from the kink") {
  Rng rng(12);
  Tensor init({5, 5});
  for (auto& v : init.v) v = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  auto a = parameter(init);
  CHECK(fd_max_rel_err({a}, [&](Tape* t) { return weigh(t, relu(t, a), 6); }, rng) < 1e-6);
}

TEST_CASE("autodiff: linear and bmm in all transpose combinations") {
  Rng rng(13);
  auto x = parameter(random_tensor({2, 5, 3}, rng));
  auto w = parameter(random_tensor({3, 4}, rng));
  auto bias = parameter(random_tensor({4}, rng));
  CHECK(fd_max_rel_err({x, w, bias}, [&](Tape* t) {
          return weigh(t, linear(t, x, w, bias), 7);
        }, rng) < 1e-6);

  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      auto A = parameter(random_tensor(ta ? Shape{2, 3, 4} : Shape{2, 4, 3}, rng));
      auto B = parameter(random_tensor(tb ? Shape{2, 5, 3} : Shape{2, 3, 5}, rng));
      CHECK(fd_max_rel_err({A, B}, [&, ta, tb](Tape* t) {
              return weigh(t, bmm(t, A, B, ta, tb), 8);
            }, rng) < 1e-6);
    }
  }
}

TEST_CASE("autodiff: softmax rows sum to one and differentiate") {
  Rng rng(14);
  auto x = parameter(random_tensor({4, 6}, rng, -3.0, 3.0));
  {
    auto y = softmax_last(nullptr, x);
    for (int r = 0; r < 4; ++r) {
      double s = 0;
      for (int c = 0; c < 6; ++c) s += y->val.v[static_cast<size_t>(r) * 6 + c];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(fd_max_rel_err({x}, [&](Tape* t) { return weigh(t, softmax_last(t, x), 9); }, rng) < 1e-6);
}

TEST_CASE("autodiff: layernorm normalizes the last axis and differentiates") {
  Rng rng(15);
  auto x = parameter(random_tensor({3, 8}, rng));
  auto g = parameter(random_tensor({8}, rng, 0.5, 1.5));
  auto b = parameter(random_tensor({8}, rng));
  {
    auto ones = parameter(Tensor::full({8}, 1.0));
    auto zeros = parameter(Tensor({8}));
    auto y = layernorm_last(nullptr, x, ones, zeros, 1e-5);
    for (int r = 0; r < 3; ++r) {
      double mean = 0, var = 0;
      for (int c = 0; c < 8; ++c) mean += y->val.v[static_cast<size_t>(r) * 8 + c];
      mean /= 8;
      for (int c = 0; c < 8; ++c) {
        const double d = y->val.v[static_cast<size_t>(r) * 8 + c] - mean;
        var += d * d;
      }
      CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(var / 8 == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  CHECK(fd_max_rel_err({x, g, b}, [&](Tape* t) {
          return weigh(t, layernorm_last(t, x, g, b, 1e-5), 10);
        }, rng) < 1e-5);
}

TEST_CASE("autodiff: shape ops round-trip gradients") {
  Rng rng(16);
  auto x = parameter(random_tensor({3, 4, 2}, rng));
  CHECK(fd_max_rel_err({x}, [&](Tape* t) {
          return weigh(t, permute(t, x, {2, 0, 1}), 11);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({x}, [&](Tape* t) {
          return weigh(t, reshape(t, x, {6, 4}), 12);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({x}, [&](Tape* t) {
          return weigh(t, pad2d(t, x, 1, 2, 0, 1), 13);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({x}, [&](Tape* t) {
          return weigh(t, crop2d(t, x, 1, 0, 1, 1), 14);
        }, rng) < 1e-6);
  CHECK(fd_max_rel_err({x}, [&](Tape* t) {
          return weigh(t, select_channel(t, x, 1), 15);
        }, rng) < 1e-6);
}

TEST_CASE("autodiff: permute matches manual transposition") {
  Rng rng(17);
  auto x = parameter(random_tensor({2, 3, 4}, rng));
  auto y = permute(nullptr, x, {1, 0, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k)
        CHECK(y->val.at({j, i, k}) == x->val.at({i, j, k}));
}

TEST_CASE("autodiff: same padding follows the ceil convention") {
  auto p = same_pad(258, 4, 2);
  CHECK(p.out == 129);
  CHECK(p.pad_lo == 1);
  CHECK(p.pad_hi == 1);
  p = same_pad(258, 4, 1);
  CHECK(p.out == 258);
  CHECK(p.pad_lo == 1);
  CHECK(p.pad_hi == 2);
  p = same_pad(10, 4, 2);
  CHECK(p.out == 5);
}

TEST_CASE("autodiff: depthwise conv matches a loop reference and differentiates") {
  Rng rng(18);
  auto x = parameter(random_tensor({6, 5, 3}, rng));
  auto k = parameter(random_tensor({4, 4, 3}, rng));
  for (const int s : {1, 2}) {
    // reference computed with plain loops
    const auto ph = same_pad(6, 4, s), pw = same_pad(5, 4, s);
    auto y = depthwise_conv2d(nullptr, x, k, s, s);
    REQUIRE(y->val.shape == Shape{ph.out, pw.out, 3});
    for (int oh = 0; oh < ph.out; ++oh) {
      for (int ow = 0; ow < pw.out; ++ow) {
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
              const int ih = oh * s + i - ph.pad_lo, iw = ow * s + j - pw.pad_lo;
              if (ih < 0 || ih >= 6 || iw < 0 || iw >= 5) continue;
              acc += x->val.at({ih, iw, c}) * k->val.at({i, j, c});
            }
          }
          CHECK(y->val.at({oh, ow, c}) == doctest::Approx(acc).epsilon(1e-12));
        }
      }
    }
    CHECK(fd_max_rel_err({x, k}, [&, s](Tape* t) {
            return weigh(t, depthwise_conv2d(t, x, k, s, s), 19);
          }, rng) < 1e-6);
  }
}

TEST_CASE("autodiff: transposed conv is the exact adjoint of the strided conv") {
  Rng rng(19);
  const int H = 5, W = 4, Ci = 3, Co = 2, s = 2, kk = 4;
  auto k = parameter(random_tensor({kk, kk, Ci, Co}, rng));
  auto x = parameter(random_tensor({H, W, Ci}, rng));

  auto up = conv2d_transpose(nullptr, x, k, nullptr, s, s);
  REQUIRE(up->val.shape == Shape{H * s, W * s, Co});

  // adjoint identity <tconv(x), y> == <x, conv_s(y)> with the matching
  // gather implemented by hand
  Tensor y = random_tensor({H * s, W * s, Co}, rng);
  double lhs = 0;
  for (int64_t i = 0; i < up->val.size(); ++i) lhs += up->val.v[static_cast<size_t>(i)] * y.v[static_cast<size_t>(i)];
  const auto pad = same_pad(H * s, kk, s);
  double rhs = 0;
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int ci = 0; ci < Ci; ++ci) {
        double acc = 0;
        for (int i = 0; i < kk; ++i)
          for (int j = 0; j < kk; ++j) {
            const int oh = h * s + i - pad.pad_lo, ow = w * s + j - pad.pad_lo;
            if (oh < 0 || oh >= H * s || ow < 0 || ow >= W * s) continue;
            for (int co = 0; co < Co; ++co)
              acc += y.at({oh, ow, co}) * k->val.at({i, j, ci, co});
          }
        rhs += x->val.at({h, w, ci}) * acc;
      }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

  auto b = parameter(random_tensor({Co}, rng));
  CHECK(fd_max_rel_err({x, k, b}, [&](Tape* t) {
          return weigh(t, conv2d_transpose(t, x, k, b, s, s), 20);
        }, rng) < 1e-6);
}

TEST_CASE("autodiff: scalar ops and clamped log10") {
  Rng rng(20);
  auto a = parameter(random_tensor({7}, rng, 0.5, 2.0));
  CHECK(fd_max_rel_err({a}, [&](Tape* t) {
          auto d = dot(t, a, a);
          return log10_clamped(t, d, 1e-12);
        }, rng) < 1e-6);

  // clamped region has zero gradient
  auto tiny = parameter(Tensor::full({1}, 1e-15));
  Tape tape;
  auto out = log10_clamped(&tape, tiny, 1e-12);
  CHECK(out->val.v[0] == doctest::Approx(-12.0));
  tape.backward(out);
  CHECK(tiny->grad.v[0] == 0.0);
}

TEST_CASE("autodiff: dropout masks match between value and gradient") {
  Rng rng(21);
  auto x = parameter(Tensor::full({1000}, 1.0));
  Rng drop_rng(5);
  Tape tape;
  auto y = dropout(&tape, x, 0.25, drop_rng, true);
  int zeros = 0;
  for (int64_t i = 0; i < y->val.size(); ++i) {
    const double v = y->val.v[static_cast<size_t>(i)];
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    if (v == 0.0) ++zeros;
  }
  CHECK(zeros > 150);
  CHECK(zeros < 350);
  auto loss = weigh(&tape, y, 22);
  tape.backward(loss);
  // gradient is the same mask times the weights
  Rng wrng(22);
  Tensor w(x->val.shape);
  for (auto& v : w.v) v = wrng.uniform(-1.0, 1.0);
  for (int64_t i = 0; i < x->val.size(); ++i) {
    const double expected =
        y->val.v[static_cast<size_t>(i)] == 0.0 ? 0.0 : w.v[static_cast<size_t>(i)] / 0.75;
    CHECK(x->grad.v[static_cast<size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
  }

  // inference mode is the identity
  Rng r2(5);
  auto yi = dropout(nullptr, x, 0.25, r2, false);
  CHECK(yi.get() == x.get());
}
