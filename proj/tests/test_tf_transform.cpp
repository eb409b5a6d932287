// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>

#include "fft.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "test_util.hpp"
#include "tf_transform.hpp"

using namespace rfsep;
using rfsep::nn::Tensor;

namespace {

std::vector<float> random_signal(int64_t n, Rng& rng, double amp = 1.0) {
  std::vector<float> x(static_cast<size_t>(n));
  for (auto& v : x) v = static_cast<float>(amp * rng.gaussian());
  return x;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("fft: matches a naive DFT") {
  Rng rng(31);
  for (const int n : {8, 16, 512}) {
    RealFft fft(n);
    std::vector<double> x(static_cast<size_t>(n));
    for (auto& v : x) v = rng.gaussian();
    std::vector<std::complex<double>> bins(static_cast<size_t>(n / 2 + 1));
    fft.forward(x.data(), bins.data());
    for (int k = 0; k <= n / 2; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (int i = 0; i < n; ++i)
        acc += x[static_cast<size_t>(i)] *
               std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * i / n));
      CHECK(std::abs(acc - bins[static_cast<size_t>(k)]) < 1e-9 * n);
    }
    std::vector<double> back(static_cast<size_t>(n));
    fft.inverse(bins.data(), back.data());
    for (int i = 0; i < n; ++i) CHECK(back[static_cast<size_t>(i)] == doctest::Approx(x[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("stft: paper-scale shapes and length validation") {
  StftConfig cfg;
  CHECK(cfg.freq_bins() == 257);
  CHECK(cfg.frames_for(65280) == 256);
  CHECK(cfg.frames_for(2048) == 9);
  CHECK_THROWS_AS((void)cfg.frames_for(1000), UsageError);

  Stft stft(cfg);
  Rng rng(32);
  const auto x = random_signal(65280, rng);
  const auto X = stft.forward(x);
  CHECK(X.freq_bins == 257);
  CHECK(X.frames == 256);
}

TEST_CASE("stft: zeros map to zeros both ways") {
  Stft stft;
  std::vector<float> x(65280, 0.0f);
  const auto X = stft.forward(x);
  for (const auto& z : X.v) CHECK(std::abs(z) == 0.0);
  const auto y = stft.inverse(X);
  for (float v : y) CHECK(v == 0.0f);
}

TEST_CASE("stft: an on-bin tone peaks at its bin in every interior frame") {
  Stft stft;
  const int k = 37;
  std::vector<float> x(65280);
  for (size_t n = 0; n < x.size(); ++n)
    x[n] = static_cast<float>(std::cos(2.0 * M_PI * k * static_cast<double>(n) / 512.0));
  const auto X = stft.forward(x);
  for (int t = 2; t < X.frames - 2; ++t) {
    int argmax = 0;
    double best = -1;
    for (int f = 0; f < X.freq_bins; ++f) {
      const double m = std::abs(X.at(f, t));
      if (m > best) {
        best = m;
        argmax = f;
      }
    }
    CHECK(argmax == k);
  }
}

TEST_CASE("stft: round trip and linearity") {
  Stft stft;
  Rng rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_signal(65280, rng);
    const auto y = stft.inverse(stft.forward(x));
    REQUIRE(y.size() == x.size());
    CHECK(max_abs_diff(x, y) < 1e-5);
  }
  const auto x1 = random_signal(2048, rng);
  const auto x2 = random_signal(2048, rng);
  std::vector<float> sum(x1.size());
  for (size_t i = 0; i < sum.size(); ++i) sum[i] = x1[i] + x2[i];
  const auto X1 = stft.forward(x1), X2 = stft.forward(x2), XS = stft.forward(sum);
  double rel = 0, ref = 0;
  for (size_t i = 0; i < XS.v.size(); ++i) {
    rel = std::max(rel, std::abs(XS.v[i] - (X1.v[i] + X2.v[i])));
    ref = std::max(ref, std::abs(XS.v[i]));
  }
  CHECK(rel < 1e-6 * ref);
}

TEST_CASE("istft: adjoint identity <istft(X), g> == <X, adjoint(g)>") {
  StftConfig cfg{64, 32, 64};
  Stft stft(cfg);
  Rng rng(34);
  const int F = cfg.freq_bins(), T = 6;
  Spectrogram X(F, T);
  for (auto& z : X.v) z = {rng.gaussian(), rng.gaussian()};
  // the inverse ignores DC/Nyquist imaginary parts; zero them for the identity
  for (int t = 0; t < T; ++t) {
    X.at(0, t) = X.at(0, t).real();
    X.at(F - 1, t) = X.at(F - 1, t).real();
  }
  const auto y = stft.inverse_double(X);
  std::vector<double> g(y.size());
  for (auto& v : g) v = rng.gaussian();
  double lhs = 0;
  for (size_t i = 0; i < y.size(); ++i) lhs += y[i] * g[i];
  const auto [gre, gim] = stft.inverse_adjoint(g, T);
  double rhs = 0;
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < T; ++t) {
      rhs += X.at(f, t).real() * gre.at({f, t});
      rhs += X.at(f, t).imag() * gim.at({f, t});
    }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("encode: log-amplitude and phase channels") {
  Spectrogram X(1, 3);
  X.at(0, 0) = {1.0, 0.0};
  X.at(0, 1) = {0.0, 10.0};
  X.at(0, 2) = {0.0, 0.0};
  const auto f = encode_logamp_phase(X);
  REQUIRE(f.shape == nn::Shape{1, 3, 2});
  CHECK(f.at({0, 0, 0}) == doctest::Approx(0.0));
  CHECK(f.at({0, 0, 1}) == doctest::Approx(0.0));
  CHECK(f.at({0, 1, 0}) == doctest::Approx(1.0));
  CHECK(f.at({0, 1, 1}) == doctest::Approx(M_PI / 2));
  CHECK(f.at({0, 2, 0}) == doctest::Approx(std::log10(kLogAmpEpsilon)));
  CHECK(f.at({0, 2, 1}) == doctest::Approx(0.0));
}

TEST_CASE("decode: identity and negative masks") {
  Tensor s({1, 1, 4});
  // channels [logamp1, logamp2, phase1, phase2]
  s.at({0, 0, 0}) = 0.0;
  s.at({0, 0, 1}) = 1.0;
  s.at({0, 0, 2}) = 0.0;
  s.at({0, 0, 3}) = M_PI;
  const auto m = decode_masks(s);
  CHECK(std::abs(m.m1.at(0, 0) - std::complex<double>{1.0, 0.0}) < 1e-12);
  CHECK(std::abs(m.m2.at(0, 0) - std::complex<double>{-10.0, 0.0}) < 1e-6);

  Tensor bad = s;
  bad.at({0, 0, 0}) = std::nan("");
  CHECK_THROWS_AS((void)decode_masks(bad), NumericError);
}

TEST_CASE("decode: inverts the encode layout on random spectrograms") {
  Rng rng(35);
  const int F = 6, T = 5;
  Spectrogram m1(F, T), m2(F, T);
  for (auto& z : m1.v) z = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
  for (auto& z : m2.v) z = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
  // build the [logamp1, logamp2, phase1, phase2] stack from both masks
  Tensor s({F, T, 4});
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < T; ++t) {
      s.at({f, t, 0}) = std::log10(std::max(std::abs(m1.at(f, t)), kLogAmpEpsilon));
      s.at({f, t, 1}) = std::log10(std::max(std::abs(m2.at(f, t)), kLogAmpEpsilon));
      s.at({f, t, 2}) = std::atan2(m1.at(f, t).imag(), m1.at(f, t).real());
      s.at({f, t, 3}) = std::atan2(m2.at(f, t).imag(), m2.at(f, t).real());
    }
  const auto back = decode_masks(s);
  for (size_t i = 0; i < m1.v.size(); ++i) {
    CHECK(std::abs(back.m1.v[i] - m1.v[i]) < 1e-5 * std::max(1.0, std::abs(m1.v[i])));
    CHECK(std::abs(back.m2.v[i] - m2.v[i]) < 1e-5 * std::max(1.0, std::abs(m2.v[i])));
  }
}

TEST_CASE("apply_masks: identity, annihilation, and band separation") {
  Stft stft;
  Rng rng(36);
  const auto x = random_signal(65280, rng);
  const auto X = stft.forward(x);
  const int F = X.freq_bins, T = X.frames;

  MaskPair ones{Spectrogram(F, T), Spectrogram(F, T)};
  for (auto& z : ones.m1.v) z = 1.0;
  for (auto& z : ones.m2.v) z = 1.0;
  auto [y1, y2] = apply_masks(stft, ones, X);
  CHECK(max_abs_diff(x, y1) < 1e-5);
  CHECK(max_abs_diff(x, y2) < 1e-5);

  MaskPair zeros{Spectrogram(F, T), Spectrogram(F, T)};
  auto [z1, z2] = apply_masks(stft, zeros, X);
  for (float v : z1) CHECK(v == 0.0f);
  for (float v : z2) CHECK(v == 0.0f);

  // two tones in disjoint bands, complementary binary band masks
  std::vector<float> tone1(65280), tone2(65280), mixv(65280);
  for (size_t n = 0; n < mixv.size(); ++n) {
    tone1[n] = static_cast<float>(0.8 * std::cos(2.0 * M_PI * 20.0 * static_cast<double>(n) / 512.0));
    tone2[n] = static_cast<float>(0.5 * std::cos(2.0 * M_PI * 200.0 * static_cast<double>(n) / 512.0));
    mixv[n] = tone1[n] + tone2[n];
  }
  const auto MX = stft.forward(mixv);
  MaskPair bands{Spectrogram(F, T), Spectrogram(F, T)};
  for (int f = 0; f < F; ++f)
    for (int t = 0; t < T; ++t)
      (f < 110 ? bands.m1 : bands.m2).at(f, t) = 1.0;
  auto [s1, s2] = apply_masks(stft, bands, MX);
  CHECK(sd_sdr(std::span<const float>(tone1), std::span<const float>(s1)) > 30.0);
  CHECK(sd_sdr(std::span<const float>(tone2), std::span<const float>(s2)) > 30.0);
}

TEST_CASE("masked_istft: analytic gradient matches finite differences on a toy grid") {
  StftConfig cfg{14, 7, 14};  // F = 8
  auto stft = std::make_shared<Stft>(cfg);
  Rng rng(37);
  const int F = cfg.freq_bins(), T = 8;
  Spectrogram mix(F, T);
  for (auto& z : mix.v) z = {rng.gaussian(), rng.gaussian()};
  auto mre = nn::parameter(testutil::random_tensor({F, T}, rng));
  auto mim = nn::parameter(testutil::random_tensor({F, T}, rng));
  const double err = testutil::fd_max_rel_err(
      {mre, mim},
      [&](nn::Tape* t) {
        auto y = masked_istft(t, mre, mim, mix, stft);
        Rng wrng(99);
        Tensor w(y->val.shape);
        for (auto& v : w.v) v = wrng.uniform(-1.0, 1.0);
        return nn::dot(t, y, nn::constant(std::move(w)));
      },
      rng, 10);
  CHECK(err < 1e-3);
}
