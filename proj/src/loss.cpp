// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "loss.hpp"

#include <cmath>

#include "common.hpp"

namespace rfsep {

namespace {

template <class T>
double sd_sdr_impl(std::span<const T> s, std::span<const T> s_hat) {
  if (s.size() != s_hat.size()) throw UsageError("sd_sdr: length mismatch");
  if (s.empty()) throw UsageError("sd_sdr: empty signals");
  double ss = 0.0, se = 0.0, err = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    const double si = s[i], ei = s_hat[i];
    ss += si * si;
    se += si * ei;
    err += (si - ei) * (si - ei);
  }
  if (ss <= 0.0) throw NumericError("sd_sdr: reference signal has zero energy");
  const double proj = se * se / ss;  // || (<s_hat,s>/||s||^2) s ||^2
  return 10.0 * std::log10(std::max(proj, kSdSdrClamp) / std::max(err, kSdSdrClamp));
}

double channel_energy(const std::vector<float>& x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

}  // namespace

double sd_sdr(std::span<const float> s, std::span<const float> s_hat) {
  return sd_sdr_impl(s, s_hat);
}
double sd_sdr(std::span<const double> s, std::span<const double> s_hat) {
  return sd_sdr_impl(s, s_hat);
}

namespace {

// Mean SD-SDR of one permutation over the active (non-silent) channels.
double perm_score(const ChannelPair& truth, const ChannelPair& est, int perm,
                  const std::array<bool, 2>& active) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < 2; ++c) {
    if (!active[static_cast<size_t>(c)]) continue;
    const auto& e = est[static_cast<size_t>(perm == 0 ? c : 1 - c)];
    sum += sd_sdr(std::span<const float>(truth[static_cast<size_t>(c)]),
                  std::span<const float>(e));
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

std::array<bool, 2> active_channels(const ChannelPair& truth, ZeroTruthPolicy policy) {
  std::array<bool, 2> active{};
  for (int c = 0; c < 2; ++c) {
    const bool a = channel_energy(truth[static_cast<size_t>(c)]) > 0.0;
    if (!a && policy == ZeroTruthPolicy::Error)
      throw NumericError("upit: ground-truth channel has zero energy");
    active[static_cast<size_t>(c)] = a;
  }
  return active;
}

}  // namespace

UpitResult upit_loss(const ChannelPair& truth, const ChannelPair& estimate,
                     ZeroTruthPolicy policy) {
  for (int c = 0; c < 2; ++c)
    if (truth[static_cast<size_t>(c)].size() != estimate[static_cast<size_t>(c)].size())
      throw UsageError("upit: channel length mismatch");
  const auto active = active_channels(truth, policy);
  const double s0 = perm_score(truth, estimate, 0, active);
  const double s1 = perm_score(truth, estimate, 1, active);
  UpitResult r;
  r.best_perm = s0 >= s1 ? 0 : 1;  // ties toward identity
  r.mean_sd_sdr = std::max(s0, s1);
  r.loss = -r.mean_sd_sdr;
  return r;
}

int best_permutation(const ChannelPair& truth, const ChannelPair& estimate,
                     ZeroTruthPolicy policy) {
  return upit_loss(truth, estimate, policy).best_perm;
}

namespace {

// Differentiable SD-SDR built from primitive graph ops.
nn::VarPtr sd_sdr_var(nn::Tape* t, const std::vector<float>& truth, nn::VarPtr est) {
  nn::Tensor ref({static_cast<int>(truth.size())});
  double ss = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    ref.v[i] = truth[i];
    ss += static_cast<double>(truth[i]) * truth[i];
  }
  auto s = nn::constant(std::move(ref));
  auto inner = nn::dot(t, est, s);
  auto proj = nn::scale(t, nn::mul(t, inner, inner), 1.0 / ss);
  auto diff = nn::sub(t, est, s);
  auto err = nn::dot(t, diff, diff);
  auto ratio = nn::sub(t, nn::log10_clamped(t, proj, kSdSdrClamp),
                       nn::log10_clamped(t, err, kSdSdrClamp));
  return nn::scale(t, ratio, 10.0);
}

}  // namespace

nn::VarPtr upit_loss_var(nn::Tape* tape, const ChannelPair& truth, nn::VarPtr est1,
                         nn::VarPtr est2, ZeroTruthPolicy policy, int* best_perm_out) {
  for (int c = 0; c < 2; ++c)
    if (static_cast<int64_t>(truth[static_cast<size_t>(c)].size()) !=
        (c == 0 ? est1 : est2)->val.size())
      throw UsageError("upit: channel length mismatch");
  const auto active = active_channels(truth, policy);
  if (!active[0] && !active[1]) {
    if (best_perm_out) *best_perm_out = 0;
    return nn::constant(nn::Tensor({1}));  // no reference energy: zero loss, no grads
  }
  // assemble both permutation scores; pick on values, keep the chosen branch
  std::array<nn::VarPtr, 2> perm_terms;
  for (int perm = 0; perm < 2; ++perm) {
    std::vector<nn::VarPtr> terms;
    int n = 0;
    for (int c = 0; c < 2; ++c) {
      if (!active[static_cast<size_t>(c)]) continue;
      auto est = (perm == 0 ? (c == 0 ? est1 : est2) : (c == 0 ? est2 : est1));
      terms.push_back(sd_sdr_var(tape, truth[static_cast<size_t>(c)], est));
      ++n;
    }
    perm_terms[static_cast<size_t>(perm)] = nn::scale(tape, nn::add_scalars(tape, terms), 1.0 / n);
  }
  const double v0 = perm_terms[0]->val.v[0];
  const double v1 = perm_terms[1]->val.v[0];
  const int best = v0 >= v1 ? 0 : 1;
  if (best_perm_out) *best_perm_out = best;
  return nn::scale(tape, perm_terms[static_cast<size_t>(best)], -1.0);
}

}  // namespace rfsep
