// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_IMAGE_HPP
#define RFSEP_IMAGE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tf_transform.hpp"

namespace rfsep {

// Binary PPM (P6); byte-deterministic for identical pixel data.
void write_ppm(const std::string& path, int width, int height, std::span<const uint8_t> rgb);

// Log-magnitude spectrogram rendered with a fixed palette over [-80, 0] dB
// relative to the peak; frequency on the vertical axis (high at the top),
// one pixel per bin/frame times an integer zoom. The signal is zero-padded
// to a hop multiple when needed.
void emit_spectrogram_image(std::span<const float> x, const StftConfig& cfg,
                            const std::string& path, int zoom = 1);

// Fixed palette lookup (t in [0,1] -> RGB), exposed for tests.
void palette_rgb(double t, uint8_t out[3]);

}  // namespace rfsep

#endif
