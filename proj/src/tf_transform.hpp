// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_TF_TRANSFORM_HPP
#define RFSEP_TF_TRANSFORM_HPP

#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "fft.hpp"
#include "tensor.hpp"

namespace rfsep {

// Fixed, non-learned time-frequency front and back ends: centered one-sided
// STFT with a periodic Hann window, its exact overlap-add inverse, and the
// log-amplitude/phase <-> complex-mask codecs around the network.
struct StftConfig {
  int window_len = 512;
  int hop = 256;
  int fft_size = 512;

  int freq_bins() const { return fft_size / 2 + 1; }
  // Centered framing: T = samples/hop + 1. Requires samples % hop == 0.
  int frames_for(int64_t samples) const;
  int64_t samples_for(int frames) const { return static_cast<int64_t>(frames - 1) * hop; }
};

// F x T complex grid, row-major over frequency.
struct Spectrogram {
  int freq_bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> v;

  Spectrogram() = default;
  Spectrogram(int f, int t) : freq_bins(f), frames(t), v(static_cast<size_t>(f) * t) {}
  std::complex<double>& at(int f, int t) { return v[static_cast<size_t>(f) * frames + t]; }
  std::complex<double> at(int f, int t) const { return v[static_cast<size_t>(f) * frames + t]; }
  bool all_finite() const;
};

struct MaskPair {
  Spectrogram m1, m2;
};

constexpr double kLogAmpEpsilon = 1e-8;  // amplitude floor inside log10
constexpr double kWindowSumFloor = 1e-10;

class Stft {
 public:
  explicit Stft(StftConfig cfg = {});

  const StftConfig& config() const { return cfg_; }

  Spectrogram forward(std::span<const float> x);
  // Exact left inverse of forward (windowed overlap-add, window-sum norm).
  std::vector<float> inverse(const Spectrogram& X);
  std::vector<double> inverse_double(const Spectrogram& X);

  // Adjoint of `inverse` as a real-linear map: given dL/dy for the time
  // signal, returns dL/d(Re X) and dL/d(Im X) as F x T tensors. The
  // imaginary parts of the DC and Nyquist bins are ignored by `inverse`,
  // so their adjoint is zero.
  std::pair<nn::Tensor, nn::Tensor> inverse_adjoint(std::span<const double> grad_y, int frames);

 private:
  StftConfig cfg_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<double> window_sum(int frames) const;
};

// Eq-style codecs between complex grids and stacked real channels.
nn::Tensor encode_logamp_phase(const Spectrogram& X);           // [F,T,2]
MaskPair decode_masks(const nn::Tensor& s);                     // [F,T,4] -> two masks
std::pair<std::vector<float>, std::vector<float>> apply_masks(Stft& stft, const MaskPair& masks,
                                                              const Spectrogram& mix);

}  // namespace rfsep

#endif
