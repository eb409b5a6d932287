// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace rfsep {

double lr_schedule(int epoch, double lr0, double decay) {
  if (epoch < 0) throw UsageError("lr_schedule: negative epoch");
  return lr0 * std::pow(decay, epoch);
}

LossScaler::LossScaler(double init_scale, int growth_interval, double min_scale, double max_scale)
    : scale_(init_scale),
      growth_interval_(growth_interval),
      min_scale_(min_scale),
      max_scale_(max_scale) {
  if (init_scale <= 0) throw UsageError("loss scaler: scale must be positive");
}

bool LossScaler::update(bool grads_finite) {
  if (!grads_finite) {
    scale_ = std::max(scale_ * 0.5, min_scale_);
    good_steps_ = 0;
    return false;
  }
  if (++good_steps_ >= growth_interval_) {
    scale_ = std::min(scale_ * 2.0, max_scale_);
    good_steps_ = 0;
  }
  return true;
}

AdamOptimizer::AdamOptimizer(std::vector<nn::VarPtr> params, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p->val.shape);
    v_.emplace_back(p->val.shape);
  }
}

void AdamOptimizer::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (p.grad.v.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (int64_t k = 0; k < p.val.size(); ++k) {
      const double g = p.grad.v[static_cast<size_t>(k)];
      m.v[static_cast<size_t>(k)] = beta1_ * m.v[static_cast<size_t>(k)] + (1.0 - beta1_) * g;
      v.v[static_cast<size_t>(k)] = beta2_ * v.v[static_cast<size_t>(k)] + (1.0 - beta2_) * g * g;
      const double mhat = m.v[static_cast<size_t>(k)] / bc1;
      const double vhat = v.v[static_cast<size_t>(k)] / bc2;
      p.val.v[static_cast<size_t>(k)] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_)
    if (!p->grad.v.empty()) std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
}

namespace {

std::vector<nn::VarPtr> model_params(Model& model) {
  std::vector<nn::VarPtr> ps;
  for (const auto& [name, p] : model.parameters()) ps.push_back(p);
  return ps;
}

bool grads_finite_after_unscale(Model& model, double inv_scale) {
  bool finite = true;
  for (const auto& [name, p] : model.parameters()) {
    if (p->grad.v.empty()) continue;
    for (auto& g : p->grad.v) {
      g *= inv_scale;
      if (!std::isfinite(g)) finite = false;
    }
  }
  return finite;
}

}  // namespace

double train_step(Model& model, const std::vector<MixtureSample>& batch, AdamOptimizer& opt,
                  LossScaler& scaler, double lr, Rng& rng, int64_t* skipped) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  nn::Tape tape;
  Model::Ctx ctx{&tape, &rng, true};
  std::vector<nn::VarPtr> losses;
  for (const auto& sample : batch) {
    auto [e1, e2] = model.forward_train(ctx, std::span<const float>(sample.mixture));
    losses.push_back(upit_loss_var(&tape, sample.truths, e1, e2));
  }
  auto loss = nn::scale(&tape, nn::add_scalars(&tape, losses),
                        1.0 / static_cast<double>(losses.size()));
  const double loss_value = loss->val.v[0];
  auto scaled = nn::scale(&tape, loss, scaler.scale());
  opt.zero_grad();
  tape.backward(scaled);
  const bool finite =
      std::isfinite(loss_value) && grads_finite_after_unscale(model, 1.0 / scaler.scale());
  if (scaler.update(finite)) {
    opt.step(lr);
  } else if (skipped) {
    ++*skipped;
  }
  return loss_value;
}

TrainResult train(Model& model, const Library& train_lib, const Library* test_lib,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.pairs_per_epoch < 1)
    throw UsageError("train: bad configuration");
  TrainResult result;
  AdamOptimizer opt(model_params(model), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  LossScaler scaler(cfg.init_loss_scale, cfg.scale_growth_interval, cfg.min_loss_scale,
                    cfg.max_loss_scale);
  Rng root(cfg.seed);
  int consecutive_skips = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // a fresh training set every epoch
    Rng epoch_rng = root.fork(0xE40C * (static_cast<uint64_t>(epoch) + 1));
    std::vector<MixtureSample> pool;
    pool.reserve(static_cast<size_t>(cfg.pairs_per_epoch));
    for (int i = 0; i < cfg.pairs_per_epoch; ++i)
      pool.push_back(build_mixture(train_lib, cfg.mix, epoch_rng));
    const double lr = lr_schedule(epoch, cfg.lr0, cfg.lr_decay);
    Rng drop_rng = root.fork(0xD407 * (static_cast<uint64_t>(epoch) + 1));
    double epoch_loss = 0.0;
    int64_t steps_this_epoch = 0;
    for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(pool.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<MixtureSample> batch(pool.begin() + static_cast<int64_t>(start),
                                       pool.begin() + static_cast<int64_t>(end));
      int64_t skipped_before = result.skipped_steps;
      const double l =
          train_step(model, batch, opt, scaler, lr, drop_rng, &result.skipped_steps);
      if (!std::isfinite(l) || result.skipped_steps > skipped_before) {
        if (++consecutive_skips > 60)
          throw NumericError("train: loss stayed non-finite despite loss-scale backoff");
      } else {
        consecutive_skips = 0;
      }
      epoch_loss += l;
      ++steps_this_epoch;
      ++result.steps;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(std::max<int64_t>(steps_this_epoch, 1));
    if (test_lib != nullptr && test_lib->entries.size() >= 2) {
      Rng test_rng = root.fork(0x7E57 * (static_cast<uint64_t>(epoch) + 1));
      const auto pairs = test_pairs(test_lib->entries.size(), cfg.seed);
      double test_loss = 0.0;
      int n = 0;
      for (const auto& [ia, ib] : pairs) {
        Rng mix_rng = test_rng.fork(static_cast<uint64_t>(n) + 1);
        auto sample = build_mixture_pair(*test_lib, ia, ib, cfg.mix, mix_rng);
        auto [e1, e2] = model.separate_signal(std::span<const float>(sample.mixture));
        test_loss += upit_loss(sample.truths, {std::move(e1), std::move(e2)}).loss;
        ++n;
      }
      if (n > 0) stats.test_loss = test_loss / n;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history: " + path);
  out << "epoch,train_loss,test_loss\n";
  char line[128];
  for (const auto& h : history) {
    if (h.test_loss)
      std::snprintf(line, sizeof(line), "%d,%.8g,%.8g\n", h.epoch, h.train_loss, *h.test_loss);
    else
      std::snprintf(line, sizeof(line), "%d,%.8g,\n", h.epoch, h.train_loss);
    out << line;
  }
}

}  // namespace rfsep
