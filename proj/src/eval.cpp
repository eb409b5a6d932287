// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eval.hpp"

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"

namespace rfsep {

EvalReport evaluate(const Separator& separate, const std::vector<MixtureSample>& samples) {
  if (samples.empty()) throw UsageError("evaluate: empty sample set");
  EvalReport report;
  report.count = static_cast<int>(samples.size());
  std::vector<int> perms;
  perms.reserve(samples.size());
  double sum = 0.0;
  for (const auto& sample : samples) {
    const auto est = separate(sample.mixture);
    const auto r = upit_loss(sample.truths, est);
    report.per_sample_sd_sdr.push_back(r.mean_sd_sdr);
    sum += r.mean_sd_sdr;
    perms.push_back(r.best_perm);
  }
  report.mean_sd_sdr = sum / static_cast<double>(samples.size());
  int flips = 0;
  for (size_t i = 0; i + 1 < perms.size(); ++i)
    if (perms[i] != perms[i + 1]) ++flips;
  report.swap_rate =
      perms.size() > 1 ? static_cast<double>(flips) / static_cast<double>(perms.size() - 1) : 0.0;
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<MixtureSample>& samples) {
  return evaluate(
      [&model](const std::vector<float>& mix) {
        auto [a, b] = model.separate_signal(std::span<const float>(mix));
        return ChannelPair{std::move(a), std::move(b)};
      },
      samples);
}

std::vector<bool> detect_channel_swaps(const std::vector<ChannelPair>& est_windows,
                                       const std::vector<ChannelPair>& truth_windows) {
  if (est_windows.size() != truth_windows.size())
    throw UsageError("detect_channel_swaps: window count mismatch");
  if (est_windows.size() < 2) throw UsageError("detect_channel_swaps: need at least 2 windows");
  std::vector<int> perms;
  for (size_t k = 0; k < est_windows.size(); ++k) {
    for (int c = 0; c < 2; ++c)
      if (est_windows[k][static_cast<size_t>(c)].size() !=
          truth_windows[k][static_cast<size_t>(c)].size())
        throw UsageError("detect_channel_swaps: window length mismatch");
    perms.push_back(best_permutation(truth_windows[k], est_windows[k]));
  }
  std::vector<bool> flags;
  for (size_t k = 0; k + 1 < perms.size(); ++k) flags.push_back(perms[k] != perms[k + 1]);
  return flags;
}

std::string eval_report_json(const EvalReport& report, const ModelConfig& cfg) {
  nlohmann::json j;
  j["mean_sd_sdr_db"] = report.mean_sd_sdr;
  j["per_sample_sd_sdr_db"] = report.per_sample_sd_sdr;
  j["swap_rate"] = report.swap_rate;
  j["count"] = report.count;
  j["model_config"] = model_config_to_json(cfg);
  return j.dump(2);
}

}  // namespace rfsep
