// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_TRAINING_HPP
#define RFSEP_TRAINING_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loss.hpp"
#include "mixture.hpp"
#include "model.hpp"

namespace rfsep {

struct TrainConfig {
  int epochs = 70;
  int batch_size = 2;
  int pairs_per_epoch = 3000;
  double lr0 = 1e-4;
  double lr_decay = 0.90;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  MixConfig mix;
  double init_loss_scale = 32768.0;  // 2^15
  int scale_growth_interval = 2000;
  double min_loss_scale = 0x1.0p-20;
  double max_loss_scale = 0x1.0p30;
};

// lr = lr0 * decay^epoch
double lr_schedule(int epoch, double lr0 = 1e-4, double decay = 0.90);

// Dynamic loss scaling: halve on a non-finite gradient and skip the step;
// double after a run of consecutive finite steps.
class LossScaler {
 public:
  LossScaler(double init_scale, int growth_interval, double min_scale, double max_scale);

  double scale() const { return scale_; }
  int good_steps() const { return good_steps_; }
  // Returns true when the update should be applied.
  bool update(bool grads_finite);

 private:
  double scale_;
  int growth_interval_;
  double min_scale_, max_scale_;
  int good_steps_ = 0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<nn::VarPtr> params, double beta1, double beta2, double eps);

  void step(double lr);
  void zero_grad();
  int64_t steps() const { return t_; }

 private:
  std::vector<nn::VarPtr> params_;
  std::vector<nn::Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> test_loss;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int64_t steps = 0;
  int64_t skipped_steps = 0;
};

// Per-epoch pipeline: regenerate mixtures, minibatch uPIT SD-SDR loss, Adam
// with the decaying schedule and dynamic loss scaling.
TrainResult train(Model& model, const Library& train_lib, const Library* test_lib,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

// One optimization step on a fixed set of mixtures; returns the unscaled
// batch loss. Exposed for overfitting checks and smoke runs.
double train_step(Model& model, const std::vector<MixtureSample>& batch, AdamOptimizer& opt,
                  LossScaler& scaler, double lr, Rng& rng, int64_t* skipped = nullptr);

}  // namespace rfsep

#endif
