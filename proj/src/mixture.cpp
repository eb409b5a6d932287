// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixture.hpp"

#include <algorithm>
#include <cmath>

namespace rfsep {

namespace {

struct Drawn {
  std::vector<float> chunk;
  double level_dbfs = 0.0;
  double snr_db = 0.0;
};

// Steps per drawn source: scale to the drawn level, keep the clean copy,
// optionally corrupt with Gaussian noise at the drawn SNR.
void scale_and_corrupt(std::vector<float>& clean, std::vector<float>& noisy, const MixConfig& cfg,
                       Rng& rng, double* level_out, double* snr_out) {
  const double level = rng.uniform(cfg.level_lo_dbfs, cfg.level_hi_dbfs);
  const double amp = std::pow(10.0, level / 20.0);
  for (auto& v : clean) v = static_cast<float>(v * amp);
  noisy = clean;
  double snr = 0.0;
  if (cfg.add_noise) {
    snr = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
    double power = 0.0;
    for (float v : clean) power += static_cast<double>(v) * v;
    power /= static_cast<double>(clean.size());
    const double sigma = std::sqrt(power * std::pow(10.0, -snr / 10.0));
    for (auto& v : noisy) v = static_cast<float>(v + sigma * rng.gaussian());
  }
  *level_out = level;
  *snr_out = snr;
}

MixtureSample assemble(std::array<std::vector<float>, 2> clean, const MixConfig& cfg, Rng& rng) {
  MixtureSample s;
  std::array<std::vector<float>, 2> noisy;
  for (int c = 0; c < 2; ++c)
    scale_and_corrupt(clean[static_cast<size_t>(c)], noisy[static_cast<size_t>(c)], cfg, rng,
                      &s.scale_dbfs[static_cast<size_t>(c)], &s.snr_db[static_cast<size_t>(c)]);
  const size_t n = clean[0].size();
  s.mixture.resize(n);
  float peak = 0.0f;
  for (size_t i = 0; i < n; ++i) {
    s.mixture[i] = noisy[0][i] + noisy[1][i];
    peak = std::max(peak, std::abs(s.mixture[i]));
  }
  s.norm_factor = peak > 0.0f ? peak : 1.0;
  const float inv = static_cast<float>(1.0 / s.norm_factor);
  for (size_t i = 0; i < n; ++i) s.mixture[i] *= inv;
  for (int c = 0; c < 2; ++c) {
    auto& tr = s.truths[static_cast<size_t>(c)];
    tr = std::move(clean[static_cast<size_t>(c)]);
    for (auto& v : tr) v *= inv;
  }
  return s;
}

}  // namespace

MixtureSample build_mixture_pair(const Library& lib, size_t ia, size_t ib, const MixConfig& cfg,
                                 Rng& rng) {
  std::array<size_t, 2> idx{ia, ib};
  std::array<std::vector<float>, 2> clean;
  std::array<int64_t, 2> offs{};
  for (int c = 0; c < 2; ++c) {
    if (idx[static_cast<size_t>(c)] >= lib.entries.size())
      throw UsageError("build_mixture: record index out of range");
    const auto& e = lib.entries[idx[static_cast<size_t>(c)]];
    if (e.length < cfg.window_len)
      throw UsageError("build_mixture: record shorter than the mixing window");
    offs[static_cast<size_t>(c)] = rng.uniform_int(0, e.length - cfg.window_len);
    clean[static_cast<size_t>(c)] =
        load_entry_chunk(lib, idx[static_cast<size_t>(c)], offs[static_cast<size_t>(c)], cfg.window_len);
  }
  MixtureSample s = assemble(std::move(clean), cfg, rng);
  s.source_index = idx;
  s.offset = offs;
  return s;
}

MixtureSample build_mixture(const Library& lib, const MixConfig& cfg, Rng& rng) {
  if (lib.entries.size() < 2) throw UsageError("build_mixture: library needs at least 2 records");
  const auto a = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(lib.entries.size()) - 1));
  size_t b = a;
  while (b == a)
    b = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(lib.entries.size()) - 1));
  return build_mixture_pair(lib, a, b, cfg, rng);
}

MixtureSample build_mixture_from(const std::vector<float>& a, const std::vector<float>& b,
                                 const MixConfig& cfg, Rng& rng) {
  if (static_cast<int64_t>(a.size()) < cfg.window_len ||
      static_cast<int64_t>(b.size()) < cfg.window_len)
    throw UsageError("build_mixture: record shorter than the mixing window");
  std::array<std::vector<float>, 2> clean;
  std::array<int64_t, 2> offs{};
  offs[0] = rng.uniform_int(0, static_cast<int64_t>(a.size()) - cfg.window_len);
  offs[1] = rng.uniform_int(0, static_cast<int64_t>(b.size()) - cfg.window_len);
  clean[0].assign(a.begin() + offs[0], a.begin() + offs[0] + cfg.window_len);
  clean[1].assign(b.begin() + offs[1], b.begin() + offs[1] + cfg.window_len);
  MixtureSample s = assemble(std::move(clean), cfg, rng);
  s.offset = offs;
  return s;
}

std::vector<std::pair<size_t, size_t>> test_pairs(size_t count, uint64_t seed) {
  std::vector<size_t> idx(count);
  for (size_t i = 0; i < count; ++i) idx[i] = i;
  Rng rng(splitmix64(seed ^ 0x7e57u));
  for (size_t i = count; i > 1; --i) {
    const auto j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i + 1 < count; i += 2) pairs.emplace_back(idx[i], idx[i + 1]);
  return pairs;
}

}  // namespace rfsep
