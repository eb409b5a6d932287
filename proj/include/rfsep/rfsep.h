/* Copyright 2026 The rfsep Authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * Public C API of the rfsep shared library: synthesis of radar waveform
 * libraries, mixture preview, model training, evaluation, separation and
 * spectrogram rendering. All functions return rfsep_status; on failure a
 * human-readable message is available from rfsep_last_error() on the same
 * thread. Status codes double as process exit codes in the bundled CLI.
 */

#ifndef RFSEP_H
#define RFSEP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rfsep_status {
  RFSEP_OK = 0,
  RFSEP_ERR_USAGE = 1,   /* invalid arguments or parameters */
  RFSEP_ERR_DATA = 2,    /* missing/corrupt files, I/O failures */
  RFSEP_ERR_NUMERIC = 3  /* non-finite values, failed numeric checks */
} rfsep_status;

const char* rfsep_version(void);
/* Message for the most recent failure on this thread; empty when none. */
const char* rfsep_last_error(void);

/* Synthesize a signal library into out_dir (raw f32 files + manifest.json).
 * kind: one of "frank","p1","costas","p3","barker","chirp" or the presets
 * "train" (frank,p1,costas) and "test" (p3,barker,chirp). count is per kind. */
rfsep_status rfsep_synth_library(const char* kind, int count, int64_t length, uint64_t seed,
                                 const char* out_dir);

/* Build `count` mixtures from a library and write mixture/truth signals plus
 * a JSON description (and optional spectrogram images) into out_dir. */
rfsep_status rfsep_mix_preview(const char* lib_dir, int count, uint64_t seed, int64_t window_len,
                               const char* out_dir, int with_plots);

/* Train a model. config_json may be NULL (defaults) or a path to a JSON file
 * with "model" and "train" sections. history_csv may be NULL. */
rfsep_status rfsep_train(const char* train_lib, const char* test_lib, const char* config_json,
                         uint64_t seed, const char* out_checkpoint, const char* history_csv);

/* Evaluate a checkpoint on deterministic pairs from a test library; writes a
 * JSON report and optional spectrogram panels. pair_count <= 0 uses all. */
rfsep_status rfsep_evaluate(const char* checkpoint, const char* test_lib, int pair_count,
                            uint64_t seed, const char* report_json, const char* plots_dir);

/* Separate a raw f32 signal window by window, writing <stem>_out1.f32 and
 * <stem>_out2.f32 plus a JSON summary into out_dir. Inputs that are not a
 * multiple of the model window are zero-padded and the outputs trimmed.
 * truth1/truth2 (optional, may be NULL) enable channel-swap checks. */
rfsep_status rfsep_separate_file(const char* checkpoint, const char* input_f32,
                                 const char* out_dir, const char* truth1_f32,
                                 const char* truth2_f32, int with_plots);

/* Render a log-magnitude spectrogram of a raw f32 signal to a PPM image. */
rfsep_status rfsep_plot_spectrogram(const char* input_f32, const char* out_image, int zoom);

/* Tiny end-to-end pipeline (synth -> mix -> short training -> eval) in
 * work_dir; fails unless the training loss decreases. */
rfsep_status rfsep_pipeline_smoke(uint64_t seed, const char* work_dir);

/* In-memory model handle. */
typedef struct rfsep_model rfsep_model;

rfsep_status rfsep_model_open(const char* checkpoint, rfsep_model** out_model);
void rfsep_model_close(rfsep_model* model);
int64_t rfsep_model_param_count(const rfsep_model* model);
/* Native processing window length (samples). */
int64_t rfsep_model_window_len(const rfsep_model* model);
/* Separate `len` samples (any length; padded internally) into two buffers of
 * the same length provided by the caller. */
rfsep_status rfsep_model_separate(rfsep_model* model, const float* mixture, int64_t len,
                                  float* out1, float* out2);

#ifdef __cplusplus
}
#endif

#endif /* RFSEP_H */
