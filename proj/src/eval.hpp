// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_EVAL_HPP
#define RFSEP_EVAL_HPP

#include <functional>
#include <string>
#include <vector>

#include "loss.hpp"
#include "mixture.hpp"
#include "model.hpp"

namespace rfsep {

struct EvalReport {
  double mean_sd_sdr = 0.0;  // dB, uPIT-aligned, averaged over samples
  std::vector<double> per_sample_sd_sdr;
  double swap_rate = 0.0;  // fraction of consecutive-sample boundaries that flip
  int count = 0;
};

// A separator maps a mixture window to two estimates. The default wraps
// Model::separate_signal; tests substitute oracles.
using Separator = std::function<ChannelPair(const std::vector<float>&)>;

EvalReport evaluate(const Separator& separate, const std::vector<MixtureSample>& samples);
EvalReport evaluate(const Model& model, const std::vector<MixtureSample>& samples);

// Per window, the uPIT best permutation vs. truth; boundary k is flagged when
// the permutation changes between windows k and k+1.
std::vector<bool> detect_channel_swaps(const std::vector<ChannelPair>& est_windows,
                                       const std::vector<ChannelPair>& truth_windows);

std::string eval_report_json(const EvalReport& report, const ModelConfig& cfg);

}  // namespace rfsep

#endif
