// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tf_transform.hpp"

#include <cmath>

#include "common.hpp"

namespace rfsep {

bool Spectrogram::all_finite() const {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

int StftConfig::frames_for(int64_t samples) const {
  if (samples <= 0 || samples % hop != 0)
    throw UsageError("stft: signal length must be a positive multiple of the hop size");
  return static_cast<int>(samples / hop) + 1;
}

Stft::Stft(StftConfig cfg) : cfg_(cfg), fft_(cfg.fft_size), window_(static_cast<size_t>(cfg.window_len)) {
  if (cfg_.window_len != cfg_.fft_size) throw UsageError("stft: window length must equal fft size");
  if (cfg_.hop * 2 != cfg_.window_len) throw UsageError("stft: hop must be half the window length");
  // Periodic Hann; together with hop = L/2 the squared-window sum never
  // vanishes inside the signal span.
  for (int n = 0; n < cfg_.window_len; ++n)
    window_[static_cast<size_t>(n)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / cfg_.window_len));
}

namespace {

// Reflect padding (no edge repeat) of half a window on both sides.
std::vector<double> reflect_pad(std::span<const float> x, int pad) {
  const int64_t n = static_cast<int64_t>(x.size());
  if (n < pad + 1) throw UsageError("stft: signal shorter than half a window");
  std::vector<double> out(static_cast<size_t>(n + 2 * pad));
  for (int i = 0; i < pad; ++i) out[static_cast<size_t>(i)] = x[static_cast<size_t>(pad - i)];
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(pad + i)] = x[static_cast<size_t>(i)];
  for (int i = 0; i < pad; ++i)
    out[static_cast<size_t>(pad + n + i)] = x[static_cast<size_t>(n - 2 - i)];
  return out;
}

}  // namespace

Spectrogram Stft::forward(std::span<const float> x) {
  const int T = cfg_.frames_for(static_cast<int64_t>(x.size()));
  const int F = cfg_.freq_bins();
  const int pad = cfg_.window_len / 2;
  const auto padded = reflect_pad(x, pad);
  Spectrogram X(F, T);
  std::vector<double> frame(static_cast<size_t>(cfg_.window_len));
  std::vector<std::complex<double>> bins(static_cast<size_t>(F));
  for (int t = 0; t < T; ++t) {
    const double* src = padded.data() + static_cast<int64_t>(t) * cfg_.hop;
    for (int n = 0; n < cfg_.window_len; ++n)
      frame[static_cast<size_t>(n)] = src[n] * window_[static_cast<size_t>(n)];
    fft_.forward(frame.data(), bins.data());
    for (int f = 0; f < F; ++f) X.at(f, t) = bins[static_cast<size_t>(f)];
  }
  return X;
}

std::vector<double> Stft::window_sum(int frames) const {
  const int64_t padded_len = static_cast<int64_t>(frames - 1) * cfg_.hop + cfg_.window_len;
  std::vector<double> wsum(static_cast<size_t>(padded_len), 0.0);
  for (int t = 0; t < frames; ++t) {
    const int64_t off = static_cast<int64_t>(t) * cfg_.hop;
    for (int n = 0; n < cfg_.window_len; ++n) {
      const double w = window_[static_cast<size_t>(n)];
      wsum[static_cast<size_t>(off + n)] += w * w;
    }
  }
  return wsum;
}

std::vector<double> Stft::inverse_double(const Spectrogram& X) {
  if (X.freq_bins != cfg_.freq_bins() || X.frames < 2)
    throw UsageError("istft: spectrogram shape inconsistent with config");
  const int T = X.frames;
  const int pad = cfg_.window_len / 2;
  const int64_t out_len = cfg_.samples_for(T);
  const int64_t padded_len = out_len + 2 * pad;
  std::vector<double> acc(static_cast<size_t>(padded_len), 0.0);
  const auto wsum = window_sum(T);
  std::vector<std::complex<double>> bins(static_cast<size_t>(X.freq_bins));
  std::vector<double> frame(static_cast<size_t>(cfg_.window_len));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < X.freq_bins; ++f) bins[static_cast<size_t>(f)] = X.at(f, t);
    bins[0] = bins[0].real();  // DC/Nyquist imaginary parts are not used
    bins[static_cast<size_t>(X.freq_bins - 1)] = bins[static_cast<size_t>(X.freq_bins - 1)].real();
    fft_.inverse(bins.data(), frame.data());
    const int64_t off = static_cast<int64_t>(t) * cfg_.hop;
    for (int n = 0; n < cfg_.window_len; ++n)
      acc[static_cast<size_t>(off + n)] += frame[static_cast<size_t>(n)] * window_[static_cast<size_t>(n)];
  }
  std::vector<double> y(static_cast<size_t>(out_len));
  for (int64_t i = 0; i < out_len; ++i) {
    const double denom = std::max(wsum[static_cast<size_t>(pad + i)], kWindowSumFloor);
    y[static_cast<size_t>(i)] = acc[static_cast<size_t>(pad + i)] / denom;
  }
  return y;
}

std::vector<float> Stft::inverse(const Spectrogram& X) {
  const auto y = inverse_double(X);
  return std::vector<float>(y.begin(), y.end());
}

std::pair<nn::Tensor, nn::Tensor> Stft::inverse_adjoint(std::span<const double> grad_y, int frames) {
  const int F = cfg_.freq_bins();
  const int T = frames;
  const int pad = cfg_.window_len / 2;
  const int64_t out_len = cfg_.samples_for(T);
  if (static_cast<int64_t>(grad_y.size()) != out_len)
    throw UsageError("istft adjoint: gradient length mismatch");
  const auto wsum = window_sum(T);
  std::vector<double> h(static_cast<size_t>(out_len + 2 * pad), 0.0);
  for (int64_t i = 0; i < out_len; ++i)
    h[static_cast<size_t>(pad + i)] =
        grad_y[static_cast<size_t>(i)] / std::max(wsum[static_cast<size_t>(pad + i)], kWindowSumFloor);
  nn::Tensor gre({F, T}), gim({F, T});
  std::vector<double> frame(static_cast<size_t>(cfg_.window_len));
  std::vector<std::complex<double>> bins(static_cast<size_t>(F));
  const double n_inv = 1.0 / cfg_.fft_size;
  for (int t = 0; t < T; ++t) {
    const int64_t off = static_cast<int64_t>(t) * cfg_.hop;
    for (int n = 0; n < cfg_.window_len; ++n)
      frame[static_cast<size_t>(n)] = window_[static_cast<size_t>(n)] * h[static_cast<size_t>(off + n)];
    fft_.forward(frame.data(), bins.data());
    for (int f = 0; f < F; ++f) {
      const double s = (f == 0 || f == F - 1) ? n_inv : 2.0 * n_inv;
      gre.v[static_cast<size_t>(f) * T + static_cast<size_t>(t)] = s * bins[static_cast<size_t>(f)].real();
      gim.v[static_cast<size_t>(f) * T + static_cast<size_t>(t)] =
          (f == 0 || f == F - 1) ? 0.0 : s * bins[static_cast<size_t>(f)].imag();
    }
  }
  return {std::move(gre), std::move(gim)};
}

nn::Tensor encode_logamp_phase(const Spectrogram& X) {
  if (!X.all_finite()) throw NumericError("encode: non-finite spectrogram");
  nn::Tensor out({X.freq_bins, X.frames, 2});
  for (int f = 0; f < X.freq_bins; ++f) {
    for (int t = 0; t < X.frames; ++t) {
      const auto z = X.at(f, t);
      const double amp = std::max(std::abs(z), kLogAmpEpsilon);
      double phase = std::atan2(z.imag(), z.real());
      if (phase <= -M_PI) phase = M_PI;
      const size_t base = (static_cast<size_t>(f) * X.frames + static_cast<size_t>(t)) * 2;
      out.v[base] = std::log10(amp);
      out.v[base + 1] = phase;
    }
  }
  return out;
}

MaskPair decode_masks(const nn::Tensor& s) {
  if (s.rank() != 3 || s.dim(2) != 4) throw UsageError("decode_masks: expected [F,T,4]");
  if (!s.all_finite()) throw NumericError("decode_masks: non-finite input");
  const int F = s.dim(0), T = s.dim(1);
  MaskPair m{Spectrogram(F, T), Spectrogram(F, T)};
  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      const size_t base = (static_cast<size_t>(f) * T + static_cast<size_t>(t)) * 4;
      // channels: [logamp1, logamp2, phase1, phase2]
      for (int c = 0; c < 2; ++c) {
        const double amp = std::pow(10.0, s.v[base + static_cast<size_t>(c)]);
        const double ph = s.v[base + 2 + static_cast<size_t>(c)];
        (c == 0 ? m.m1 : m.m2).at(f, t) = {amp * std::cos(ph), amp * std::sin(ph)};
      }
    }
  }
  return m;
}

std::pair<std::vector<float>, std::vector<float>> apply_masks(Stft& stft, const MaskPair& masks,
                                                              const Spectrogram& mix) {
  if (masks.m1.freq_bins != mix.freq_bins || masks.m1.frames != mix.frames ||
      masks.m2.freq_bins != mix.freq_bins || masks.m2.frames != mix.frames)
    throw UsageError("apply_masks: mask/mixture shape mismatch");
  Spectrogram y1(mix.freq_bins, mix.frames), y2(mix.freq_bins, mix.frames);
  for (size_t i = 0; i < mix.v.size(); ++i) {
    y1.v[i] = masks.m1.v[i] * mix.v[i];
    y2.v[i] = masks.m2.v[i] * mix.v[i];
  }
  return {stft.inverse(y1), stft.inverse(y2)};
}

}  // namespace rfsep
