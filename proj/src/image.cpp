// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "common.hpp"

namespace rfsep {

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

// Inferno-like anchors, dark floor to bright peak.
constexpr uint8_t kAnchors[][3] = {
    {0, 0, 4},     {40, 11, 84},   {101, 21, 110}, {159, 42, 99},
    {212, 72, 66}, {245, 125, 21}, {250, 193, 39}, {252, 255, 164},
};
}  // namespace

void palette_rgb(double t, uint8_t out[3]) {
  t = std::clamp(t, 0.0, 1.0);
  constexpr int n = static_cast<int>(std::size(kAnchors));
  const double x = t * (n - 1);
  const int i = std::min(static_cast<int>(x), n - 2);
  const double f = x - i;
  for (int c = 0; c < 3; ++c) {
    const double v = kAnchors[i][c] + f * (kAnchors[i + 1][c] - kAnchors[i][c]);
    out[c] = static_cast<uint8_t>(std::lround(v));
  }
}

void write_ppm(const std::string& path, int width, int height, std::span<const uint8_t> rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<size_t>(width) * static_cast<size_t>(height) * 3)
    throw UsageError("write_ppm: bad dimensions");
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open image for writing: " + path);
  char header[64];
  const int n = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", width, height);
  if (std::fwrite(header, 1, static_cast<size_t>(n), f.get()) != static_cast<size_t>(n) ||
      std::fwrite(rgb.data(), 1, rgb.size(), f.get()) != rgb.size())
    throw DataError("short write: " + path);
}

void emit_spectrogram_image(std::span<const float> x, const StftConfig& cfg,
                            const std::string& path, int zoom) {
  if (zoom < 1) throw UsageError("emit_spectrogram_image: zoom must be >= 1");
  if (x.empty()) throw UsageError("emit_spectrogram_image: empty signal");
  std::vector<float> padded(x.begin(), x.end());
  const int64_t min_len = cfg.hop;  // at least two frames, centered
  int64_t len = std::max<int64_t>(static_cast<int64_t>(padded.size()), min_len);
  if (len % cfg.hop != 0) len += cfg.hop - len % cfg.hop;
  padded.resize(static_cast<size_t>(len), 0.0f);
  for (float v : padded)
    if (!std::isfinite(v)) throw NumericError("emit_spectrogram_image: non-finite sample");

  Stft stft(cfg);
  const Spectrogram X = stft.forward(padded);
  const int F = X.freq_bins, T = X.frames;
  double peak = 0.0;
  for (const auto& z : X.v) peak = std::max(peak, std::abs(z));
  const double floor_db = -80.0;
  std::vector<uint8_t> rgb(static_cast<size_t>(F) * T * 3 * static_cast<size_t>(zoom) *
                           static_cast<size_t>(zoom));
  const int W = T * zoom;
  for (int f = 0; f < F; ++f) {
    const int row = F - 1 - f;  // high frequency at the top
    for (int t = 0; t < T; ++t) {
      double db = floor_db;
      if (peak > 0.0) {
        const double mag = std::abs(X.at(f, t));
        db = mag > 0.0 ? 20.0 * std::log10(mag / peak) : floor_db;
      }
      uint8_t c[3];
      palette_rgb((std::clamp(db, floor_db, 0.0) - floor_db) / -floor_db, c);
      for (int zy = 0; zy < zoom; ++zy) {
        for (int zx = 0; zx < zoom; ++zx) {
          const size_t px =
              ((static_cast<size_t>(row) * zoom + zy) * static_cast<size_t>(W) +
               static_cast<size_t>(t) * zoom + zx) * 3;
          rgb[px] = c[0];
          rgb[px + 1] = c[1];
          rgb[px + 2] = c[2];
        }
      }
    }
  }
  write_ppm(path, W, F * zoom, rgb);
}

}  // namespace rfsep
