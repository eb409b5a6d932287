// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end. Links only the public C API of librfsep.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "rfsep/rfsep.h"

namespace {

int finish(rfsep_status status) {
  if (status != RFSEP_OK) std::fprintf(stderr, "error: %s\n", rfsep_last_error());
  return static_cast<int>(status);
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind source separation of radar signals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rfsep_version()));

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize a waveform signal library");
  std::string synth_kind = "train";
  int synth_count = 4;
  int64_t synth_length = 1000000;
  uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--kind", synth_kind,
                    "frank|p1|costas|p3|barker|chirp or preset train|test")->capture_default_str();
  synth->add_option("--count", synth_count, "signals per kind")->capture_default_str();
  synth->add_option("--length", synth_length, "samples per signal")->capture_default_str();
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
  synth->add_option("--out-dir", synth_out, "output directory")->required();

  // mix-preview
  auto* mixp = app.add_subcommand("mix-preview", "Build example mixtures from a library");
  std::string mixp_lib, mixp_out;
  int mixp_count = 4;
  uint64_t mixp_seed = 0;
  int64_t mixp_window = 0;
  bool mixp_plots = false;
  mixp->add_option("--lib", mixp_lib, "library directory")->required();
  mixp->add_option("--count", mixp_count, "number of mixtures")->capture_default_str();
  mixp->add_option("--seed", mixp_seed, "RNG seed")->capture_default_str();
  mixp->add_option("--window", mixp_window, "window length (0: library default)");
  mixp->add_option("--out-dir", mixp_out, "output directory")->required();
  mixp->add_flag("--plots", mixp_plots, "emit spectrogram images");

  // train
  auto* train = app.add_subcommand("train", "Train a separation model");
  std::string train_lib, train_test_lib, train_config, train_ckpt, train_log;
  uint64_t train_seed = 0;
  train->add_option("--train-lib", train_lib, "training library directory")->required();
  train->add_option("--test-lib", train_test_lib, "test library directory");
  train->add_option("--config", train_config, "JSON config with model/train sections");
  train->add_option("--seed", train_seed, "RNG seed")->capture_default_str();
  train->add_option("--out-checkpoint", train_ckpt, "checkpoint output path")->required();
  train->add_option("--log", train_log, "history CSV path");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test library");
  std::string eval_ckpt, eval_lib, eval_report, eval_plots;
  int eval_pairs = 0;
  uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--test-lib", eval_lib, "test library directory")->required();
  eval->add_option("--pairs", eval_pairs, "mixture pair count (0: all)")->capture_default_str();
  eval->add_option("--seed", eval_seed, "RNG seed")->capture_default_str();
  eval->add_option("--report", eval_report, "JSON report output path")->required();
  eval->add_option("--plots", eval_plots, "directory for spectrogram panels");

  // separate
  auto* sep = app.add_subcommand("separate", "Separate a raw f32 signal file");
  std::string sep_ckpt, sep_in, sep_out, sep_t1, sep_t2;
  bool sep_plots = false;
  sep->add_option("--checkpoint", sep_ckpt, "checkpoint path")->required();
  sep->add_option("--input", sep_in, "raw f32 mixture file")->required();
  sep->add_option("--out-dir", sep_out, "output directory")->required();
  sep->add_option("--truth1", sep_t1, "raw f32 ground truth, channel 1");
  sep->add_option("--truth2", sep_t2, "raw f32 ground truth, channel 2");
  sep->add_flag("--plots", sep_plots, "emit spectrogram images");

  // plot
  auto* plot = app.add_subcommand("plot", "Render a spectrogram image of a raw f32 signal");
  std::string plot_in, plot_out;
  int plot_zoom = 1;
  plot->add_option("--input", plot_in, "raw f32 signal file")->required();
  plot->add_option("--out", plot_out, "PPM image output path")->required();
  plot->add_option("--zoom", plot_zoom, "integer pixel zoom")->capture_default_str();

  // smoke
  auto* smoke = app.add_subcommand("smoke", "Tiny end-to-end pipeline check");
  uint64_t smoke_seed = 0;
  std::string smoke_dir;
  smoke->add_option("--seed", smoke_seed, "RNG seed")->capture_default_str();
  smoke->add_option("--work-dir", smoke_dir, "working directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(RFSEP_ERR_USAGE);
  }

  if (synth->parsed())
    return finish(rfsep_synth_library(synth_kind.c_str(), synth_count, synth_length, synth_seed,
                                      synth_out.c_str()));
  if (mixp->parsed())
    return finish(rfsep_mix_preview(mixp_lib.c_str(), mixp_count, mixp_seed, mixp_window,
                                    mixp_out.c_str(), mixp_plots ? 1 : 0));
  if (train->parsed())
    return finish(rfsep_train(train_lib.c_str(), opt(train_test_lib), opt(train_config),
                              train_seed, train_ckpt.c_str(), opt(train_log)));
  if (eval->parsed())
    return finish(rfsep_evaluate(eval_ckpt.c_str(), eval_lib.c_str(), eval_pairs, eval_seed,
                                 eval_report.c_str(), opt(eval_plots)));
  if (sep->parsed())
    return finish(rfsep_separate_file(sep_ckpt.c_str(), sep_in.c_str(), sep_out.c_str(),
                                      opt(sep_t1), opt(sep_t2), sep_plots ? 1 : 0));
  if (plot->parsed())
    return finish(rfsep_plot_spectrogram(plot_in.c_str(), plot_out.c_str(), plot_zoom));
  if (smoke->parsed()) return finish(rfsep_pipeline_smoke(smoke_seed, smoke_dir.c_str()));
  return static_cast<int>(RFSEP_ERR_USAGE);
}
