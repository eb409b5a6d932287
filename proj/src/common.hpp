// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_COMMON_HPP
#define RFSEP_COMMON_HPP

#include <stdexcept>
#include <string>

namespace rfsep {

// Error taxonomy mirrors the process exit codes: usage 1, data 2, numeric 3.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kSampleRate = 50e6;  // Hz, fixed for the whole pipeline
constexpr int kWindowSamples = 65280; // network input/output length

}  // namespace rfsep

#endif
