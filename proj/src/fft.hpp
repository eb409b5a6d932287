// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_FFT_HPP
#define RFSEP_FFT_HPP

#include <complex>

struct fftw_plan_s;

namespace rfsep {

// One-dimensional real<->complex FFT of fixed size, double precision (FFTW).
// An instance owns its buffers and plans; use one instance per thread.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // n real samples -> n/2+1 complex bins (unnormalized analysis DFT).
  void forward(const double* in, std::complex<double>* out);
  // n/2+1 complex bins -> n real samples, scaled by 1/n (exact inverse).
  void inverse(const std::complex<double>* in, double* out);

 private:
  int n_;
  double* real_;
  std::complex<double>* cplx_;
  fftw_plan_s* fwd_;
  fftw_plan_s* inv_;
};

}  // namespace rfsep

#endif
