// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_RNG_HPP
#define RFSEP_RNG_HPP

#include <cstdint>
#include <random>

namespace rfsep {

// Deterministic RNG. std::mt19937_64 gives a portable bit stream, but the
// standard distributions do not, so all draws go through our own mappings.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive
  double gaussian();                     // standard normal (Box-Muller)

  // Independent stream derived from the original seed and a stream id.
  // Unaffected by how many draws were made on this instance.
  Rng fork(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

uint64_t splitmix64(uint64_t x);

}  // namespace rfsep

#endif
