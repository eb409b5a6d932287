// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_SIGNAL_IO_HPP
#define RFSEP_SIGNAL_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace rfsep {

struct TimeSignal {
  std::vector<float> samples;
  double sample_rate = kSampleRate;

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
  bool all_finite() const;
};

// Raw little-endian float32, one file per signal.
void write_signal_f32(const std::string& path, const std::vector<float>& samples);
std::vector<float> read_signal_f32(const std::string& path);

}  // namespace rfsep

#endif
