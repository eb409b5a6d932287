// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "waveforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace rfsep {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Intrapulse k) {
  switch (k) {
    case Intrapulse::Frank: return "frank";
    case Intrapulse::P1: return "p1";
    case Intrapulse::Costas: return "costas";
    case Intrapulse::P3: return "p3";
    case Intrapulse::Barker: return "barker";
    case Intrapulse::LinearChirp: return "chirp";
  }
  return "?";
}

const char* to_string(Interpulse k) {
  switch (k) {
    case Interpulse::CW: return "cw";
    case Interpulse::ConstantPri: return "constant_pri";
    case Interpulse::StaggerPri: return "stagger_pri";
    case Interpulse::JitterPri: return "jitter_pri";
    case Interpulse::DwellAndSwitch: return "dwell_switch";
  }
  return "?";
}

Intrapulse intrapulse_from_string(const std::string& s) {
  for (auto k : {Intrapulse::Frank, Intrapulse::P1, Intrapulse::Costas, Intrapulse::P3,
                 Intrapulse::Barker, Intrapulse::LinearChirp})
    if (s == to_string(k)) return k;
  throw UsageError("unknown intrapulse kind: " + s);
}

Interpulse interpulse_from_string(const std::string& s) {
  for (auto k : {Interpulse::CW, Interpulse::ConstantPri, Interpulse::StaggerPri,
                 Interpulse::JitterPri, Interpulse::DwellAndSwitch})
    if (s == to_string(k)) return k;
  throw UsageError("unknown interpulse kind: " + s);
}

std::vector<Intrapulse> train_kinds() {
  return {Intrapulse::Frank, Intrapulse::P1, Intrapulse::Costas};
}
std::vector<Intrapulse> test_kinds() {
  return {Intrapulse::P3, Intrapulse::Barker, Intrapulse::LinearChirp};
}

// ----------------------------------------------------------------- intrapulse

namespace {

constexpr int kBarkerLengths[] = {2, 3, 4, 5, 7, 11, 13};

// Canonical Barker sequences as 0/1 flags (phase = flag * pi).
const std::vector<int>& barker_flags(int n) {
  static const std::vector<std::vector<int>> table = {
      {0, 1},
      {0, 0, 1},
      {0, 0, 0, 1},
      {0, 0, 0, 1, 0},
      {0, 0, 0, 1, 1, 0, 1},
      {0, 0, 0, 1, 1, 1, 0, 1, 1, 0, 1},
      {0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0},
  };
  for (size_t i = 0; i < std::size(kBarkerLengths); ++i)
    if (kBarkerLengths[i] == n) return table[i];
  throw UsageError("barker: unsupported code length " + std::to_string(n));
}

}  // namespace

PhaseCode phase_code(Intrapulse kind, int code_length) {
  if (code_length < 1) throw UsageError("phase_code: code length must be positive");
  PhaseCode pc;
  const int m = code_length;
  switch (kind) {
    case Intrapulse::Frank:
      // phi(i,j) = 2*pi*i*j/M, row-major, M*M chips
      pc.phases.reserve(static_cast<size_t>(m) * m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          pc.phases.push_back(2.0 * M_PI * i * j / m);
      break;
    case Intrapulse::P1:
      // phi(i,j) = -(pi/M) * (M - (2j-1)) * ((j-1)M + (i-1)), i,j in 1..M
      pc.phases.reserve(static_cast<size_t>(m) * m);
      for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= m; ++i)
          pc.phases.push_back(-(M_PI / m) * (m - (2.0 * j - 1.0)) * ((j - 1.0) * m + (i - 1.0)));
      break;
    case Intrapulse::P3:
      // phi(i) = pi*i^2/M
      pc.phases.reserve(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) pc.phases.push_back(M_PI * i * i / m);
      break;
    case Intrapulse::Barker: {
      const auto& flags = barker_flags(m);
      for (int f : flags) pc.phases.push_back(f * M_PI);
      break;
    }
    default:
      throw UsageError(std::string("phase_code: not a phase-coded kind: ") + to_string(kind));
  }
  return pc;
}

namespace {

// First verified Costas arrays per order, lexicographic. Validity (all
// difference vectors distinct) is enforced by the test suite.
const std::vector<std::vector<int>>& costas_table(int len) {
  static const std::vector<std::vector<int>> c3 = {
      {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}};
  static const std::vector<std::vector<int>> c4 = {
      {0, 1, 3, 2}, {0, 2, 3, 1}, {0, 3, 1, 2}, {1, 0, 2, 3},
      {1, 2, 0, 3}, {1, 3, 2, 0}, {2, 0, 1, 3}, {2, 1, 3, 0}};
  static const std::vector<std::vector<int>> c5 = {
      {0, 2, 3, 1, 4}, {0, 3, 1, 2, 4}, {0, 3, 2, 4, 1}, {0, 3, 4, 2, 1},
      {0, 4, 2, 1, 3}, {0, 4, 3, 1, 2}, {1, 0, 3, 4, 2}, {1, 0, 4, 2, 3}};
  static const std::vector<std::vector<int>> c6 = {
      {0, 1, 4, 3, 5, 2}, {0, 1, 5, 3, 2, 4}, {0, 2, 1, 4, 5, 3}, {0, 2, 1, 5, 3, 4},
      {0, 2, 5, 3, 4, 1}, {0, 3, 2, 4, 5, 1}, {0, 3, 4, 2, 1, 5}, {0, 3, 5, 4, 1, 2}};
  static const std::vector<std::vector<int>> c8 = {
      {0, 1, 4, 6, 5, 3, 7, 2}, {0, 1, 7, 5, 2, 4, 3, 6}, {0, 2, 5, 1, 6, 7, 4, 3},
      {0, 2, 5, 6, 4, 1, 7, 3}, {0, 2, 5, 6, 4, 3, 7, 1}, {0, 2, 7, 5, 6, 1, 4, 3},
      {0, 3, 1, 7, 6, 2, 4, 5}, {0, 3, 4, 2, 6, 5, 7, 1}};
  static const std::vector<std::vector<int>> c9 = {
      {0, 1, 5, 3, 8, 7, 4, 6, 2}, {0, 1, 5, 7, 4, 2, 8, 3, 6}, {0, 1, 5, 7, 4, 3, 8, 6, 2},
      {0, 1, 5, 8, 4, 2, 7, 6, 3}, {0, 1, 6, 4, 8, 5, 7, 3, 2}, {0, 1, 6, 5, 8, 3, 7, 4, 2},
      {0, 1, 7, 3, 8, 6, 5, 2, 4}, {0, 1, 8, 3, 6, 2, 7, 5, 4}};
  static const std::vector<std::vector<int>> c10 = {
      {0, 1, 3, 7, 4, 9, 8, 6, 2, 5}, {0, 1, 4, 6, 2, 9, 8, 5, 3, 7},
      {0, 1, 4, 8, 2, 7, 3, 9, 6, 5}, {0, 1, 4, 8, 2, 9, 7, 6, 3, 5},
      {0, 1, 5, 8, 7, 4, 6, 2, 9, 3}, {0, 1, 7, 4, 9, 3, 5, 8, 6, 2},
      {0, 1, 7, 9, 5, 2, 6, 4, 3, 8}, {0, 1, 8, 2, 4, 9, 7, 3, 6, 5}};
  switch (len) {
    case 3: return c3;
    case 4: return c4;
    case 5: return c5;
    case 6: return c6;
    case 8: return c8;
    case 9: return c9;
    case 10: return c10;
    default:
      throw UsageError("costas: unsupported code length " + std::to_string(len));
  }
}

}  // namespace

std::span<const std::vector<int>> costas_arrays(int code_length) {
  const auto& t = costas_table(code_length);
  return {t.data(), t.size()};
}

std::vector<int> costas_sequence(int code_length) { return costas_table(code_length)[0]; }

std::vector<int> costas_sequence(int code_length, Rng& rng) {
  const auto& t = costas_table(code_length);
  return t[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(t.size()) - 1))];
}

// ----------------------------------------------------------------- synthesis

TimeSignal synth_pulse(const WaveformSpec& spec) {
  const double fs = kSampleRate;
  const int64_t n = std::llround(spec.pulse_width * fs);
  if (n < 1) throw UsageError("synth_pulse: pulse width below one sample");
  TimeSignal out;
  out.sample_rate = fs;
  out.samples.resize(static_cast<size_t>(n));

  switch (spec.intrapulse) {
    case Intrapulse::Frank:
    case Intrapulse::P1:
    case Intrapulse::P3:
    case Intrapulse::Barker: {
      const auto pc = phase_code(spec.intrapulse, spec.code_length);
      const int64_t chips = static_cast<int64_t>(pc.phases.size());
      if (n < chips) throw UsageError("synth_pulse: fewer samples than code chips");
      const double f = spec.carrier_or_start_freq;
      int64_t chip = 0;
      // chip boundaries quantized to the nearest sample
      int64_t next = std::llround(static_cast<double>(n) / static_cast<double>(chips));
      for (int64_t i = 0; i < n; ++i) {
        while (i >= next && chip + 1 < chips) {
          ++chip;
          next = std::llround(static_cast<double>(n) * (chip + 1) / static_cast<double>(chips));
        }
        const double t = static_cast<double>(i) / fs;
        out.samples[static_cast<size_t>(i)] =
            static_cast<float>(std::cos(2.0 * M_PI * f * t + pc.phases[static_cast<size_t>(chip)]));
      }
      break;
    }
    case Intrapulse::LinearChirp: {
      const double f0 = spec.carrier_or_start_freq;
      const double rate = spec.bandwidth / spec.pulse_width;
      for (int64_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        out.samples[static_cast<size_t>(i)] =
            static_cast<float>(std::cos(2.0 * M_PI * (f0 * t + 0.5 * rate * t * t)));
      }
      break;
    }
    case Intrapulse::Costas: {
      Rng rng = Rng(spec.seed).fork(0xC057);
      const auto perm = costas_sequence(spec.code_length, rng);
      const int L = spec.code_length;
      if (n < L) throw UsageError("synth_pulse: fewer samples than Costas dwells");
      const double df = spec.bandwidth / std::max(L - 1, 1);
      // Phase-continuous hop synthesis over L equal sub-dwells.
      double phase = 0.0;
      int dwell = 0;
      int64_t next = std::llround(static_cast<double>(n) / L);
      for (int64_t i = 0; i < n; ++i) {
        while (i >= next && dwell + 1 < L) {
          ++dwell;
          next = std::llround(static_cast<double>(n) * (dwell + 1) / static_cast<double>(L));
        }
        const double f = spec.carrier_or_start_freq + perm[static_cast<size_t>(dwell)] * df;
        out.samples[static_cast<size_t>(i)] = static_cast<float>(std::cos(phase));
        phase += 2.0 * M_PI * f / fs;
      }
      break;
    }
  }
  return out;
}

namespace {

// PRI draw per the parameter table: offset interval with random upper bound.
double draw_pri(double pw, Rng& rng) {
  const double delta = rng.uniform(50e-6, 400e-6);
  return 2.0 * pw + rng.uniform(0.0, delta);
}

}  // namespace

TimeSignal apply_interpulse(const TimeSignal& pulse, const WaveformSpec& spec, int64_t total_len,
                            Rng& rng) {
  const int64_t np = pulse.length();
  if (total_len < np) throw UsageError("apply_interpulse: total length shorter than the pulse");
  TimeSignal out;
  out.sample_rate = pulse.sample_rate;
  out.samples.assign(static_cast<size_t>(total_len), 0.0f);
  const double fs = pulse.sample_rate;

  auto place = [&](int64_t toa) {
    const int64_t end = std::min(toa + np, total_len);
    for (int64_t i = toa; i < end; ++i)
      out.samples[static_cast<size_t>(i)] = pulse.samples[static_cast<size_t>(i - toa)];
  };

  switch (spec.interpulse) {
    case Interpulse::CW: {
      for (int64_t i = 0; i < total_len; ++i)
        out.samples[static_cast<size_t>(i)] = pulse.samples[static_cast<size_t>(i % np)];
      break;
    }
    case Interpulse::ConstantPri: {
      const int64_t step = std::llround(spec.pri_base * fs);
      for (int64_t toa = 0; toa < total_len; toa += step) place(toa);
      break;
    }
    case Interpulse::JitterPri: {
      // per-pulse uniform jitter of +-10% around the nominal PRI
      int64_t toa = 0;
      while (toa < total_len) {
        place(toa);
        toa += std::llround(spec.pri_base * (1.0 + rng.uniform(-0.1, 0.1)) * fs);
      }
      break;
    }
    case Interpulse::StaggerPri: {
      const int k = static_cast<int>(rng.uniform_int(2, 4));
      std::vector<int64_t> steps(static_cast<size_t>(k));
      for (auto& s : steps) s = std::llround(draw_pri(spec.pulse_width, rng) * fs);
      int64_t toa = 0;
      int idx = 0;
      while (toa < total_len) {
        place(toa);
        toa += steps[static_cast<size_t>(idx)];
        idx = (idx + 1) % k;
      }
      break;
    }
    case Interpulse::DwellAndSwitch: {
      const int k = static_cast<int>(rng.uniform_int(2, 4));
      std::vector<int64_t> steps(static_cast<size_t>(k));
      for (auto& s : steps) s = std::llround(draw_pri(spec.pulse_width, rng) * fs);
      int64_t toa = 0;
      int idx = 0;
      int64_t hold = rng.uniform_int(4, 16);
      while (toa < total_len) {
        place(toa);
        toa += steps[static_cast<size_t>(idx)];
        if (--hold == 0) {
          idx = (idx + 1) % k;
          hold = rng.uniform_int(4, 16);
        }
      }
      break;
    }
  }
  return out;
}

TimeSignal synth_signal(const WaveformSpec& spec, int64_t total_len) {
  const TimeSignal pulse = synth_pulse(spec);
  Rng rng = Rng(spec.seed).fork(0x1A7E);
  return apply_interpulse(pulse, spec, total_len, rng);
}

WaveformSpec sample_spec(Intrapulse kind, Rng& rng) {
  WaveformSpec s;
  s.intrapulse = kind;
  s.pulse_width = rng.uniform(4e-6, 50e-6);
  s.pri_base = draw_pri(s.pulse_width, rng);
  s.interpulse = static_cast<Interpulse>(rng.uniform_int(0, 4));
  switch (kind) {
    case Intrapulse::Frank:
    case Intrapulse::P1:
      s.carrier_or_start_freq = rng.uniform(3e6, 23e6);
      s.code_length = static_cast<int>(rng.uniform_int(3, 8));
      break;
    case Intrapulse::P3:
      s.carrier_or_start_freq = rng.uniform(3e6, 23e6);
      s.code_length = static_cast<int>(rng.uniform_int(3, 20));
      break;
    case Intrapulse::Barker: {
      s.carrier_or_start_freq = rng.uniform(3e6, 23e6);
      s.code_length = kBarkerLengths[rng.uniform_int(0, 6)];
      break;
    }
    case Intrapulse::Costas: {
      static constexpr int lens[] = {3, 4, 5, 6, 8, 9, 10};
      s.code_length = lens[rng.uniform_int(0, 6)];
      s.bandwidth = rng.uniform(5e6, 23e6);
      // hop ladder placed fully inside the sampled band
      s.carrier_or_start_freq = rng.uniform(0.5e6, 24.5e6 - s.bandwidth);
      break;
    }
    case Intrapulse::LinearChirp:
      s.carrier_or_start_freq = rng.uniform(3e6, 15e6);
      s.bandwidth = rng.uniform(2e6, 23e6 - s.carrier_or_start_freq);
      break;
  }
  s.seed = rng.next_u64();
  return s;
}

// -------------------------------------------------------------------- library

namespace {

json spec_to_json(const WaveformSpec& s) {
  return json{{"intrapulse", to_string(s.intrapulse)},
              {"interpulse", to_string(s.interpulse)},
              {"pulse_width_s", s.pulse_width},
              {"pri_base_s", s.pri_base},
              {"carrier_or_start_freq_hz", s.carrier_or_start_freq},
              {"bandwidth_hz", s.bandwidth},
              {"code_length", s.code_length},
              {"seed", s.seed}};
}

WaveformSpec spec_from_json(const json& j) {
  WaveformSpec s;
  s.intrapulse = intrapulse_from_string(j.at("intrapulse").get<std::string>());
  s.interpulse = interpulse_from_string(j.at("interpulse").get<std::string>());
  s.pulse_width = j.at("pulse_width_s").get<double>();
  s.pri_base = j.at("pri_base_s").get<double>();
  s.carrier_or_start_freq = j.at("carrier_or_start_freq_hz").get<double>();
  s.bandwidth = j.at("bandwidth_hz").get<double>();
  s.code_length = j.at("code_length").get<int>();
  s.seed = j.at("seed").get<uint64_t>();
  return s;
}

}  // namespace

Library generate_library(const std::string& dir, std::span<const Intrapulse> kinds,
                         int count_per_kind, int64_t length, uint64_t seed, int threads) {
  if (count_per_kind < 1) throw UsageError("generate_library: count must be >= 1");
  if (kinds.empty()) throw UsageError("generate_library: no kinds given");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create library directory: " + dir);

  Library lib;
  lib.dir = dir;
  Rng master(seed);
  for (auto kind : kinds) {
    for (int i = 0; i < count_per_kind; ++i) {
      LibraryEntry e;
      e.spec = sample_spec(kind, master);
      e.length = length;
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%06zu.f32", to_string(kind), lib.entries.size());
      e.file = name;
      lib.entries.push_back(std::move(e));
    }
  }

  if (threads <= 0)
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(lib.entries.size()));
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::string> errors(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = next.fetch_add(1); i < lib.entries.size(); i = next.fetch_add(1)) {
          const auto sig = synth_signal(lib.entries[i].spec, length);
          write_signal_f32((fs::path(dir) / lib.entries[i].file).string(), sig.samples);
        }
      } catch (const std::exception& ex) {
        errors[static_cast<size_t>(w)] = ex.what();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (!e.empty()) throw DataError("library generation failed: " + e);

  json manifest;
  manifest["sample_rate"] = lib.sample_rate;
  manifest["signals"] = json::array();
  for (const auto& e : lib.entries) {
    json j = spec_to_json(e.spec);
    j["file"] = e.file;
    j["length"] = e.length;
    manifest["signals"].push_back(std::move(j));
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
  return lib;
}

Library load_library(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad manifest: ") + ex.what());
  }
  Library lib;
  lib.dir = dir;
  lib.sample_rate = manifest.at("sample_rate").get<double>();
  for (const auto& j : manifest.at("signals")) {
    LibraryEntry e;
    e.spec = spec_from_json(j);
    e.file = j.at("file").get<std::string>();
    e.length = j.at("length").get<int64_t>();
    lib.entries.push_back(std::move(e));
  }
  return lib;
}

std::vector<float> load_entry(const Library& lib, size_t index) {
  if (index >= lib.entries.size()) throw UsageError("load_entry: index out of range");
  return read_signal_f32((fs::path(lib.dir) / lib.entries[index].file).string());
}

std::vector<float> load_entry_chunk(const Library& lib, size_t index, int64_t offset, int64_t len) {
  if (index >= lib.entries.size()) throw UsageError("load_entry_chunk: index out of range");
  const auto& e = lib.entries[index];
  if (offset < 0 || len < 0 || offset + len > e.length)
    throw UsageError("load_entry_chunk: range outside record");
  const std::string path = (fs::path(lib.dir) / e.file).string();
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open: " + path);
  std::vector<float> out(static_cast<size_t>(len));
  std::fseek(f, static_cast<long>(offset * static_cast<int64_t>(sizeof(float))), SEEK_SET);
  const size_t got = std::fread(out.data(), sizeof(float), out.size(), f);
  std::fclose(f);
  if (got != out.size()) throw DataError("short read: " + path);
  return out;
}

}  // namespace rfsep
