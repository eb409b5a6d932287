// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rfsep/rfsep.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "eval.hpp"
#include "image.hpp"
#include "training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

thread_local std::string g_last_error;

template <class Fn>
rfsep_status guard(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return RFSEP_OK;
  } catch (const rfsep::UsageError& e) {
    g_last_error = e.what();
    return RFSEP_ERR_USAGE;
  } catch (const rfsep::DataError& e) {
    g_last_error = e.what();
    return RFSEP_ERR_DATA;
  } catch (const rfsep::NumericError& e) {
    g_last_error = e.what();
    return RFSEP_ERR_NUMERIC;
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return RFSEP_ERR_DATA;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RFSEP_ERR_DATA;
  }
}

std::string require(const char* s, const char* what) {
  if (s == nullptr || *s == '\0')
    throw rfsep::UsageError(std::string(what) + " must not be empty");
  return s;
}

std::vector<rfsep::Intrapulse> parse_kinds(const std::string& kind) {
  if (kind == "train") return rfsep::train_kinds();
  if (kind == "test") return rfsep::test_kinds();
  return {rfsep::intrapulse_from_string(kind)};
}

rfsep::TrainConfig train_config_from_json(const json& j) {
  rfsep::TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.pairs_per_epoch = j.value("pairs_per_epoch", cfg.pairs_per_epoch);
  cfg.lr0 = j.value("lr0", cfg.lr0);
  cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.init_loss_scale = j.value("init_loss_scale", cfg.init_loss_scale);
  cfg.scale_growth_interval = j.value("scale_growth_interval", cfg.scale_growth_interval);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    cfg.mix.window_len = m.value("window_len", cfg.mix.window_len);
    cfg.mix.level_lo_dbfs = m.value("level_lo_dbfs", cfg.mix.level_lo_dbfs);
    cfg.mix.level_hi_dbfs = m.value("level_hi_dbfs", cfg.mix.level_hi_dbfs);
    cfg.mix.add_noise = m.value("add_noise", cfg.mix.add_noise);
    cfg.mix.snr_lo_db = m.value("snr_lo_db", cfg.mix.snr_lo_db);
    cfg.mix.snr_hi_db = m.value("snr_hi_db", cfg.mix.snr_hi_db);
  }
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rfsep::DataError("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw rfsep::DataError("cannot create directory: " + dir);
}

// Window-by-window inference with zero padding to a window multiple.
void separate_windows(const rfsep::Model& model, const std::vector<float>& input,
                      std::vector<float>& out1, std::vector<float>& out2,
                      std::vector<std::array<std::vector<float>, 2>>* windows_out) {
  const int64_t window = model.config().window_len;
  const int64_t len = static_cast<int64_t>(input.size());
  if (len == 0) throw rfsep::UsageError("separate: empty input");
  const int64_t padded = (len + window - 1) / window * window;
  std::vector<float> buf(input);
  buf.resize(static_cast<size_t>(padded), 0.0f);
  out1.assign(static_cast<size_t>(padded), 0.0f);
  out2.assign(static_cast<size_t>(padded), 0.0f);
  for (int64_t off = 0; off < padded; off += window) {
    auto [a, b] = model.separate_signal(
        std::span<const float>(buf.data() + off, static_cast<size_t>(window)));
    std::copy(a.begin(), a.end(), out1.begin() + off);
    std::copy(b.begin(), b.end(), out2.begin() + off);
    if (windows_out) windows_out->push_back({std::move(a), std::move(b)});
  }
  out1.resize(static_cast<size_t>(len));
  out2.resize(static_cast<size_t>(len));
}

}  // namespace

extern "C" {

const char* rfsep_version(void) { return "0.1.0"; }

const char* rfsep_last_error(void) { return g_last_error.c_str(); }

rfsep_status rfsep_synth_library(const char* kind, int count, int64_t length, uint64_t seed,
                                 const char* out_dir) {
  return guard([&] {
    const auto kinds = parse_kinds(require(kind, "kind"));
    if (count < 1) throw rfsep::UsageError("count must be >= 1");
    if (length < 1) throw rfsep::UsageError("length must be >= 1");
    rfsep::generate_library(require(out_dir, "out dir"), kinds, count, length, seed);
  });
}

rfsep_status rfsep_mix_preview(const char* lib_dir, int count, uint64_t seed, int64_t window_len,
                               const char* out_dir, int with_plots) {
  return guard([&] {
    const auto lib = rfsep::load_library(require(lib_dir, "library dir"));
    if (count < 1) throw rfsep::UsageError("count must be >= 1");
    rfsep::MixConfig mix;
    if (window_len > 0) mix.window_len = window_len;
    const std::string dir = require(out_dir, "out dir");
    ensure_dir(dir);
    rfsep::Rng root(seed);
    json desc = json::array();
    for (int i = 0; i < count; ++i) {
      rfsep::Rng rng = root.fork(static_cast<uint64_t>(i) + 1);
      const auto s = rfsep::build_mixture(lib, mix, rng);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "mixture_%04d", i);
      const std::string mix_file = std::string(stem) + "_mix.f32";
      rfsep::write_signal_f32((fs::path(dir) / mix_file).string(), s.mixture);
      rfsep::write_signal_f32((fs::path(dir) / (std::string(stem) + "_src1.f32")).string(),
                              s.truths[0]);
      rfsep::write_signal_f32((fs::path(dir) / (std::string(stem) + "_src2.f32")).string(),
                              s.truths[1]);
      if (with_plots)
        rfsep::emit_spectrogram_image(s.mixture, rfsep::StftConfig{},
                                      (fs::path(dir) / (std::string(stem) + "_mix.ppm")).string());
      desc.push_back(json{{"mixture", mix_file},
                          {"source_index", {s.source_index[0], s.source_index[1]}},
                          {"offset", {s.offset[0], s.offset[1]}},
                          {"scale_dbfs", {s.scale_dbfs[0], s.scale_dbfs[1]}},
                          {"snr_db", {s.snr_db[0], s.snr_db[1]}},
                          {"norm_factor", s.norm_factor}});
    }
    std::ofstream out(fs::path(dir) / "mixtures.json");
    out << desc.dump(2) << "\n";
    if (!out) throw rfsep::DataError("cannot write mixtures.json");
  });
}

rfsep_status rfsep_train(const char* train_lib, const char* test_lib, const char* config_json,
                         uint64_t seed, const char* out_checkpoint, const char* history_csv) {
  return guard([&] {
    const auto lib = rfsep::load_library(require(train_lib, "train library"));
    std::optional<rfsep::Library> tlib;
    if (test_lib != nullptr && *test_lib != '\0') tlib = rfsep::load_library(test_lib);
    rfsep::ModelConfig mcfg;
    rfsep::TrainConfig tcfg;
    if (config_json != nullptr && *config_json != '\0') {
      const json j = load_json_file(config_json);
      if (j.contains("model")) mcfg = rfsep::model_config_from_json(j.at("model"));
      if (j.contains("train")) tcfg = train_config_from_json(j.at("train"));
    }
    tcfg.seed = seed;
    tcfg.mix.window_len = mcfg.window_len;
    rfsep::Model model(mcfg, seed);
    const auto result = rfsep::train(model, lib, tlib ? &*tlib : nullptr, tcfg,
                                     [](const rfsep::EpochStats& s) {
                                       std::fprintf(stderr, "epoch %d: train loss %.4f\n", s.epoch,
                                                    s.train_loss);
                                     });
    rfsep::save_checkpoint(model, require(out_checkpoint, "output checkpoint"));
    if (history_csv != nullptr && *history_csv != '\0')
      rfsep::write_history_csv(history_csv, result.history);
  });
}

rfsep_status rfsep_evaluate(const char* checkpoint, const char* test_lib, int pair_count,
                            uint64_t seed, const char* report_json, const char* plots_dir) {
  return guard([&] {
    auto model = rfsep::load_checkpoint(require(checkpoint, "checkpoint"));
    const auto lib = rfsep::load_library(require(test_lib, "test library"));
    auto pairs = rfsep::test_pairs(lib.entries.size(), seed);
    if (pairs.empty()) throw rfsep::UsageError("test library needs at least 2 records");
    if (pair_count > 0 && static_cast<size_t>(pair_count) < pairs.size())
      pairs.resize(static_cast<size_t>(pair_count));
    rfsep::MixConfig mix;
    mix.window_len = model.config().window_len;
    rfsep::Rng root(seed);
    std::vector<rfsep::MixtureSample> samples;
    for (size_t i = 0; i < pairs.size(); ++i) {
      rfsep::Rng rng = root.fork(i + 1);
      samples.push_back(rfsep::build_mixture_pair(lib, pairs[i].first, pairs[i].second, mix, rng));
    }
    const auto report = rfsep::evaluate(model, samples);
    const std::string text = rfsep::eval_report_json(report, model.config());
    std::ofstream out(require(report_json, "report path"));
    out << text << "\n";
    if (!out) throw rfsep::DataError("cannot write report");
    if (plots_dir != nullptr && *plots_dir != '\0') {
      ensure_dir(plots_dir);
      const size_t n_plots = std::min<size_t>(samples.size(), 4);
      for (size_t i = 0; i < n_plots; ++i) {
        auto [a, b] = model.separate_signal(std::span<const float>(samples[i].mixture));
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%03zu", i);
        const auto base = fs::path(plots_dir);
        rfsep::emit_spectrogram_image(samples[i].mixture, model.config().stft,
                                      (base / (std::string(stem) + "_mix.ppm")).string());
        rfsep::emit_spectrogram_image(a, model.config().stft,
                                      (base / (std::string(stem) + "_out1.ppm")).string());
        rfsep::emit_spectrogram_image(b, model.config().stft,
                                      (base / (std::string(stem) + "_out2.ppm")).string());
      }
    }
  });
}

rfsep_status rfsep_separate_file(const char* checkpoint, const char* input_f32,
                                 const char* out_dir, const char* truth1_f32,
                                 const char* truth2_f32, int with_plots) {
  return guard([&] {
    auto model = rfsep::load_checkpoint(require(checkpoint, "checkpoint"));
    const auto input = rfsep::read_signal_f32(require(input_f32, "input"));
    const std::string dir = require(out_dir, "out dir");
    if ((truth1_f32 == nullptr) != (truth2_f32 == nullptr))
      throw rfsep::UsageError("provide both truth files or neither");
    ensure_dir(dir);
    std::vector<float> out1, out2;
    std::vector<std::array<std::vector<float>, 2>> windows;
    separate_windows(model, input, out1, out2, &windows);
    const std::string stem = fs::path(input_f32).stem().string();
    rfsep::write_signal_f32((fs::path(dir) / (stem + "_out1.f32")).string(), out1);
    rfsep::write_signal_f32((fs::path(dir) / (stem + "_out2.f32")).string(), out2);
    json summary;
    summary["input"] = input_f32;
    summary["samples"] = input.size();
    summary["window_len"] = model.config().window_len;
    summary["windows"] = windows.size();
    if (truth1_f32 != nullptr) {
      const auto t1 = rfsep::read_signal_f32(truth1_f32);
      const auto t2 = rfsep::read_signal_f32(truth2_f32);
      if (t1.size() != input.size() || t2.size() != input.size())
        throw rfsep::UsageError("truth signals must match the input length");
      const int64_t window = model.config().window_len;
      std::vector<rfsep::ChannelPair> truth_windows;
      for (size_t w = 0; w < windows.size(); ++w) {
        rfsep::ChannelPair tw;
        for (int c = 0; c < 2; ++c) {
          const auto& t = c == 0 ? t1 : t2;
          const size_t off = w * static_cast<size_t>(window);
          const size_t end = std::min(t.size(), off + static_cast<size_t>(window));
          tw[static_cast<size_t>(c)].assign(t.begin() + static_cast<int64_t>(off),
                                            t.begin() + static_cast<int64_t>(end));
          tw[static_cast<size_t>(c)].resize(static_cast<size_t>(window), 0.0f);
        }
        truth_windows.push_back(std::move(tw));
      }
      std::vector<rfsep::ChannelPair> est_windows;
      for (auto& w : windows) est_windows.push_back({std::move(w[0]), std::move(w[1])});
      if (est_windows.size() >= 2) {
        const auto flags = rfsep::detect_channel_swaps(est_windows, truth_windows);
        summary["swap_boundaries"] = flags;
        for (size_t k = 0; k < flags.size(); ++k)
          if (flags[k])
            std::fprintf(stderr, "warning: channel swap at window boundary %zu\n", k + 1);
      }
    }
    std::ofstream sum(fs::path(dir) / (stem + "_summary.json"));
    sum << summary.dump(2) << "\n";
    if (!sum) throw rfsep::DataError("cannot write summary");
    if (with_plots) {
      rfsep::emit_spectrogram_image(input, model.config().stft,
                                    (fs::path(dir) / (stem + "_mix.ppm")).string());
      rfsep::emit_spectrogram_image(out1, model.config().stft,
                                    (fs::path(dir) / (stem + "_out1.ppm")).string());
      rfsep::emit_spectrogram_image(out2, model.config().stft,
                                    (fs::path(dir) / (stem + "_out2.ppm")).string());
    }
  });
}

rfsep_status rfsep_plot_spectrogram(const char* input_f32, const char* out_image, int zoom) {
  return guard([&] {
    const auto x = rfsep::read_signal_f32(require(input_f32, "input"));
    rfsep::emit_spectrogram_image(x, rfsep::StftConfig{}, require(out_image, "output image"),
                                  zoom < 1 ? 1 : zoom);
  });
}

rfsep_status rfsep_pipeline_smoke(uint64_t seed, const char* work_dir) {
  return guard([&] {
    const std::string dir = require(work_dir, "work dir");
    ensure_dir(dir);
    // synth: 2 kinds x 2 records
    const std::vector<rfsep::Intrapulse> kinds = {rfsep::Intrapulse::Frank,
                                                  rfsep::Intrapulse::Costas};
    const std::string lib_dir = (fs::path(dir) / "lib").string();
    const auto lib = rfsep::generate_library(lib_dir, kinds, 2, 1 << 14, seed);

    rfsep::ModelConfig mcfg = rfsep::ModelConfig::tiny();
    rfsep::Model model(mcfg, seed);
    rfsep::MixConfig mix;
    mix.window_len = mcfg.window_len;
    mix.add_noise = false;
    rfsep::Rng rng(seed);
    std::vector<rfsep::MixtureSample> batch;
    batch.push_back(rfsep::build_mixture_pair(lib, 0, 2, mix, rng));
    batch.push_back(rfsep::build_mixture_pair(lib, 1, 3, mix, rng));

    rfsep::TrainConfig tcfg;
    std::vector<rfsep::nn::VarPtr> params;
    for (const auto& [name, p] : model.parameters()) params.push_back(p);
    rfsep::AdamOptimizer opt(params, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
    rfsep::LossScaler scaler(tcfg.init_loss_scale, tcfg.scale_growth_interval,
                             tcfg.min_loss_scale, tcfg.max_loss_scale);
    rfsep::Rng drop_rng(seed + 1);
    double first = 0.0, last = 0.0;
    const int steps = 50;
    for (int i = 0; i < steps; ++i) {
      const double l = rfsep::train_step(model, batch, opt, scaler, 1e-3, drop_rng);
      if (i == 0) first = l;
      last = l;
      if (!std::isfinite(l)) throw rfsep::NumericError("smoke: non-finite loss at step " +
                                                       std::to_string(i));
    }
    if (!(last < first))
      throw rfsep::NumericError("smoke: training loss did not decrease (" +
                                std::to_string(first) + " -> " + std::to_string(last) + ")");
    const std::string ckpt = (fs::path(dir) / "smoke.ckpt").string();
    rfsep::save_checkpoint(model, ckpt);
    const auto report = rfsep::evaluate(model, batch);
    std::ofstream out(fs::path(dir) / "smoke_report.json");
    out << rfsep::eval_report_json(report, mcfg) << "\n";
    if (!out) throw rfsep::DataError("cannot write smoke report");
    std::fprintf(stderr, "smoke: loss %.3f -> %.3f over %d steps, mean SD-SDR %.2f dB\n", first,
                 last, steps, report.mean_sd_sdr);
  });
}

struct rfsep_model {
  rfsep::Model model;
};

rfsep_status rfsep_model_open(const char* checkpoint, rfsep_model** out_model) {
  return guard([&] {
    if (out_model == nullptr) throw rfsep::UsageError("out_model must not be null");
    *out_model = new rfsep_model{rfsep::load_checkpoint(require(checkpoint, "checkpoint"))};
  });
}

void rfsep_model_close(rfsep_model* model) { delete model; }

int64_t rfsep_model_param_count(const rfsep_model* model) {
  return model ? model->model.param_count() : -1;
}

int64_t rfsep_model_window_len(const rfsep_model* model) {
  return model ? model->model.config().window_len : -1;
}

rfsep_status rfsep_model_separate(rfsep_model* model, const float* mixture, int64_t len,
                                  float* out1, float* out2) {
  return guard([&] {
    if (model == nullptr || mixture == nullptr || out1 == nullptr || out2 == nullptr)
      throw rfsep::UsageError("null argument");
    if (len < 1) throw rfsep::UsageError("len must be >= 1");
    std::vector<float> in(mixture, mixture + len);
    std::vector<float> a, b;
    separate_windows(model->model, in, a, b, nullptr);
    std::copy(a.begin(), a.end(), out1);
    std::copy(b.begin(), b.end(), out2);
  });
}

}  // extern "C"
