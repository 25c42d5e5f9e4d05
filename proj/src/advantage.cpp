#include "adagrpo/advantage.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "adagrpo/gaussian.hpp"

namespace adagrpo {

void validate_group(const RolloutGroup& group) {
  if (group.n < 1) throw std::invalid_argument("rollout group: n must be >= 1");
  const auto expected = static_cast<std::size_t>(2 * group.n);
  if (group.rollouts.size() != expected) {
    throw std::invalid_argument("rollout group: expected " + std::to_string(expected) +
                                " rollouts, got " + std::to_string(group.rollouts.size()));
  }
  if (group.rewards.size() != group.rollouts.size()) {
    throw std::invalid_argument("rollout group: rewards not aligned with rollouts");
  }
  for (std::size_t j = 0; j < expected; ++j) {
    const ModeId want = j < static_cast<std::size_t>(group.n) ? ModeId::TXT : ModeId::GRD;
    if (group.rollouts[j].mode != want) {
      throw std::invalid_argument("rollout group: rollout " + std::to_string(j) + " should carry " +
                                  std::string(mode_prefix(want)));
    }
  }
}

MeanVariance mean_variance(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_variance: empty input");
  const auto count = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanVariance out;
  out.mean = sum / count;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / count;
  return out;
}

std::vector<double> rollout_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("rollout_advantages: empty reward list");
  const MeanVariance mv = mean_variance(rewards);
  const double std_dev = std::sqrt(mv.variance);
  std::vector<double> out(rewards.size(), 0.0);
  if (std_dev < kRolloutStdEpsilon) return out;
  for (std::size_t j = 0; j < rewards.size(); ++j) out[j] = (rewards[j] - mv.mean) / std_dev;
  return out;
}

ModeAdvantage mode_relative_advantage(std::span<const double> rewards_txt,
                                      std::span<const double> rewards_grd) {
  if (rewards_txt.empty() || rewards_grd.empty()) {
    throw std::invalid_argument("mode_relative_advantage: each mode needs at least one reward");
  }
  ModeAdvantage out;
  out.txt = mean_variance(rewards_txt);
  out.grd = mean_variance(rewards_grd);
  const double gap = out.grd.mean - out.txt.mean;
  const double combined = out.grd.variance + out.txt.variance;
  if (combined < kModeVarianceEpsilon) {
    out.a_v = gap > 0.0 ? 1.0 : (gap < 0.0 ? 0.0 : 0.5);
  } else {
    out.a_v = phi(gap / std::sqrt(combined));
  }
  out.a_t = 1.0 - out.a_v;
  return out;
}

ModeAdvantage centered(ModeAdvantage adv) {
  adv.a_t -= 0.5;
  adv.a_v -= 0.5;
  return adv;
}

AdvantageAssignment piecewise_token_advantages(std::span<const std::size_t> token_counts,
                                               std::span<const double> prefix_values,
                                               std::span<const double> rollout_adv) {
  if (prefix_values.size() != token_counts.size() || rollout_adv.size() != token_counts.size()) {
    throw std::invalid_argument("token advantages: lengths are not aligned");
  }
  AdvantageAssignment out(token_counts.size());
  for (std::size_t j = 0; j < token_counts.size(); ++j) {
    if (token_counts[j] == 0) throw std::invalid_argument("token advantages: empty rollout");
    out[j].assign(token_counts[j], rollout_adv[j]);
    out[j][0] = prefix_values[j];
  }
  return out;
}

AdvantageAssignment assign_token_advantages(const RolloutGroup& group, const ModeAdvantage& adv,
                                            std::span<const double> rollout_adv) {
  validate_group(group);
  if (rollout_adv.size() != group.rollouts.size()) {
    throw std::invalid_argument("assign_token_advantages: rollout advantages not aligned");
  }
  std::vector<std::size_t> counts;
  std::vector<double> prefix;
  counts.reserve(group.rollouts.size());
  prefix.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) {
    counts.push_back(r.num_tokens());
    prefix.push_back(adv.for_mode(r.mode));
  }
  return piecewise_token_advantages(counts, prefix, rollout_adv);
}

AdvantageAssignment uniform_token_advantages(std::span<const std::size_t> token_counts,
                                             std::span<const double> rollout_adv) {
  return piecewise_token_advantages(token_counts, rollout_adv, rollout_adv);
}

}  // namespace adagrpo
