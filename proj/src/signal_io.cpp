// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "signal_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <memory>

namespace rfsep {

static_assert(std::endian::native == std::endian::little,
              "raw f32 signal files assume a little-endian host");

bool TimeSignal::all_finite() const {
  for (float s : samples)
    if (!std::isfinite(s)) return false;
  return true;
}

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

void write_signal_f32(const std::string& path, const std::vector<float>& samples) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open for writing: " + path);
  if (!samples.empty() &&
      std::fwrite(samples.data(), sizeof(float), samples.size(), f.get()) != samples.size())
    throw DataError("short write: " + path);
}

std::vector<float> read_signal_f32(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open: " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long bytes = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (bytes < 0 || bytes % static_cast<long>(sizeof(float)) != 0)
    throw DataError("not a raw f32 file: " + path);
  std::vector<float> out(static_cast<size_t>(bytes) / sizeof(float));
  if (!out.empty() && std::fread(out.data(), sizeof(float), out.size(), f.get()) != out.size())
    throw DataError("short read: " + path);
  return out;
}

}  // namespace rfsep
