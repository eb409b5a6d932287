// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "common.hpp"

namespace rfsep {

namespace {
// FFTW plan creation/destruction is not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n <= 0 || n % 2 != 0) throw UsageError("RealFft: size must be positive and even");
  real_ = fftw_alloc_real(static_cast<size_t>(n));
  cplx_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(static_cast<size_t>(bins())));
  std::lock_guard<std::mutex> lock(plan_mutex());
  fwd_ = fftw_plan_dft_r2c_1d(n, real_, reinterpret_cast<fftw_complex*>(cplx_), FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cplx_), real_, FFTW_ESTIMATE);
  if (!fwd_ || !inv_) throw NumericError("RealFft: plan creation failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
  fftw_free(real_);
  fftw_free(cplx_);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(real_, in, sizeof(double) * static_cast<size_t>(n_));
  fftw_execute(fwd_);
  std::memcpy(out, cplx_, sizeof(std::complex<double>) * static_cast<size_t>(bins()));
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(cplx_, in, sizeof(std::complex<double>) * static_cast<size_t>(bins()));
  fftw_execute(inv_);
  const double inv_n = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] = real_[i] * inv_n;
}

}  // namespace rfsep
