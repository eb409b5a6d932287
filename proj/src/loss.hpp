// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_LOSS_HPP
#define RFSEP_LOSS_HPP

#include <array>
#include <span>
#include <vector>

#include "autodiff.hpp"

namespace rfsep {

// Both log-ratio terms are clamped below to keep the objective finite.
constexpr double kSdSdrClamp = 1e-12;

// Scale-dependent SDR in dB: 10*log10(|| (<s_hat,s>/||s||^2) s ||^2 / ||s - s_hat||^2).
// Throws NumericError when the reference has zero energy.
double sd_sdr(std::span<const float> s, std::span<const float> s_hat);
double sd_sdr(std::span<const double> s, std::span<const double> s_hat);

// Channels whose ground truth is all-zero within the window are skipped from
// the permutation mean (sparse pulse trains can produce silent chunks).
enum class ZeroTruthPolicy { Skip, Error };

using ChannelPair = std::array<std::vector<float>, 2>;

struct UpitResult {
  double loss = 0.0;     // -max over permutations of the mean SD-SDR
  int best_perm = 0;     // 0 = identity, 1 = swap; ties resolve to identity
  double mean_sd_sdr = 0.0;  // at the best permutation
};

UpitResult upit_loss(const ChannelPair& truth, const ChannelPair& estimate,
                     ZeroTruthPolicy policy = ZeroTruthPolicy::Skip);
int best_permutation(const ChannelPair& truth, const ChannelPair& estimate,
                     ZeroTruthPolicy policy = ZeroTruthPolicy::Skip);

// Differentiable route used in training; est1/est2 are graph nodes holding
// the separated time-domain signals. The permutation choice itself is made
// on values and gradients flow through the chosen branch.
nn::VarPtr upit_loss_var(nn::Tape* tape, const ChannelPair& truth, nn::VarPtr est1,
                         nn::VarPtr est2, ZeroTruthPolicy policy = ZeroTruthPolicy::Skip,
                         int* best_perm_out = nullptr);

}  // namespace rfsep

#endif
