// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_MIXTURE_HPP
#define RFSEP_MIXTURE_HPP

#include <array>
#include <vector>

#include "waveforms.hpp"

namespace rfsep {

struct MixConfig {
  int64_t window_len = kWindowSamples;
  // per-signal level in dB relative to unit full scale (amplitude 10^(P/20))
  double level_lo_dbfs = -80.0;
  double level_hi_dbfs = -10.0;
  bool add_noise = true;
  double snr_lo_db = 0.0;  // per-signal SNR of the added Gaussian noise
  double snr_hi_db = 30.0;
};

struct MixtureSample {
  std::vector<float> mixture;                 // max |mixture| == 1 after normalization
  std::array<std::vector<float>, 2> truths;   // clean scaled sources / norm_factor
  std::array<double, 2> scale_dbfs{};
  std::array<double, 2> snr_db{};
  double norm_factor = 1.0;
  std::array<size_t, 2> source_index{};
  std::array<int64_t, 2> offset{};
};

// Draw a pair of distinct records, cut random windows, scale, corrupt with
// noise, sum, and normalize by the mixture peak.
MixtureSample build_mixture(const Library& lib, const MixConfig& cfg, Rng& rng);

// Same pipeline with a caller-chosen record pair (deterministic test sets).
MixtureSample build_mixture_pair(const Library& lib, size_t ia, size_t ib, const MixConfig& cfg,
                                 Rng& rng);

// Same construction from in-memory records (used by tests and smoke runs).
MixtureSample build_mixture_from(const std::vector<float>& a, const std::vector<float>& b,
                                 const MixConfig& cfg, Rng& rng);

// Deterministic test pairing: a seeded shuffle of all indices, consecutive
// pairs, each record used at most once.
std::vector<std::pair<size_t, size_t>> test_pairs(size_t count, uint64_t seed);

}  // namespace rfsep

#endif
