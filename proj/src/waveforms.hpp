// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_WAVEFORMS_HPP
#define RFSEP_WAVEFORMS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rng.hpp"
#include "signal_io.hpp"

namespace rfsep {

enum class Intrapulse { Frank, P1, Costas, P3, Barker, LinearChirp };
enum class Interpulse { CW, ConstantPri, StaggerPri, JitterPri, DwellAndSwitch };

const char* to_string(Intrapulse k);
const char* to_string(Interpulse k);
Intrapulse intrapulse_from_string(const std::string& s);
Interpulse interpulse_from_string(const std::string& s);

// Training kinds: Frank, P1, Costas. Test kinds: P3, Barker, LinearChirp.
std::vector<Intrapulse> train_kinds();
std::vector<Intrapulse> test_kinds();

struct WaveformSpec {
  Intrapulse intrapulse = Intrapulse::Frank;
  Interpulse interpulse = Interpulse::ConstantPri;
  double pulse_width = 10e-6;           // seconds
  double pri_base = 120e-6;             // seconds
  double carrier_or_start_freq = 5e6;   // Hz
  double bandwidth = 0.0;               // Hz; Costas and chirp only
  int code_length = 4;
  uint64_t seed = 0;
};

struct PhaseCode {
  std::vector<double> phases;  // radians, one per chip
};

// Chip phase sequences. Frank/P1 expand a length-M parameter into M*M chips;
// P3 uses code_length chips; Barker covers the canonical binary lengths
// {2,3,4,5,7,11,13} with 0/pi phases.
PhaseCode phase_code(Intrapulse kind, int code_length);

// Verified Costas frequency-hop permutations, lengths {3,4,5,6,8,9,10}.
std::span<const std::vector<int>> costas_arrays(int code_length);
std::vector<int> costas_sequence(int code_length);            // first stored array
std::vector<int> costas_sequence(int code_length, Rng& rng);  // uniform among stored

// One rectangular-envelope passband pulse of round(PW * fs) samples.
TimeSignal synth_pulse(const WaveformSpec& spec);

// Pulse copies placed at TOAs according to the interpulse pattern; CW tiles
// the modulation back to back.
TimeSignal apply_interpulse(const TimeSignal& pulse, const WaveformSpec& spec, int64_t total_len,
                            Rng& rng);

// Full record synthesis; pure function of (spec, total_len).
TimeSignal synth_signal(const WaveformSpec& spec, int64_t total_len);

WaveformSpec sample_spec(Intrapulse kind, Rng& rng);

struct LibraryEntry {
  std::string file;  // relative to the library directory
  WaveformSpec spec;
  int64_t length = 0;
};

struct Library {
  std::string dir;
  double sample_rate = kSampleRate;
  std::vector<LibraryEntry> entries;
};

// Synthesizes count_per_kind signals per kind into dir (raw f32 files plus a
// JSON manifest). Per-sample work is seeded independently, so results do not
// depend on the number of threads.
Library generate_library(const std::string& dir, std::span<const Intrapulse> kinds,
                         int count_per_kind, int64_t length, uint64_t seed, int threads = 0);
Library load_library(const std::string& dir);
std::vector<float> load_entry(const Library& lib, size_t index);
std::vector<float> load_entry_chunk(const Library& lib, size_t index, int64_t offset, int64_t len);

}  // namespace rfsep

#endif
