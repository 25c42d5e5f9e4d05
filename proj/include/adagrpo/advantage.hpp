#pragma once

#include <span>
#include <vector>

#include "adagrpo/rollout.hpp"

namespace adagrpo {

inline constexpr double kRolloutStdEpsilon = 1e-8;
inline constexpr double kModeVarianceEpsilon = 1e-12;

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;  // population (no Bessel correction)
};

MeanVariance mean_variance(std::span<const double> values);

/// Group-standardized rewards, (r - mean) / std over the whole group with
/// the population std. All zeros when std < 1e-8.
std::vector<double> rollout_advantages(std::span<const double> rewards);

/// Probability that a reward from one mode beats a reward from the other,
/// with each sub-group modeled as an independent Gaussian.
struct ModeAdvantage {
  double a_t = 0.5;
  double a_v = 0.5;
  MeanVariance txt;
  MeanVariance grd;

  double for_mode(ModeId mode) const { return mode == ModeId::TXT ? a_t : a_v; }
};

/// a_v = phi((mu_v - mu_t) / sqrt(var_v + var_t)), a_t = 1 - a_v. When the
/// combined variance is below 1e-12 the limit is taken: 1, 0, or 0.5 on a tie.
ModeAdvantage mode_relative_advantage(std::span<const double> rewards_txt,
                                      std::span<const double> rewards_grd);

/// Shifts both values by -0.5, so the losing prefix is pushed down.
ModeAdvantage centered(ModeAdvantage adv);

/// Per rollout, per token.
using AdvantageAssignment = std::vector<std::vector<double>>;

/// Token 0 of rollout j gets prefix_values[j]; every other token gets
/// rollout_adv[j].
AdvantageAssignment piecewise_token_advantages(std::span<const std::size_t> token_counts,
                                               std::span<const double> prefix_values,
                                               std::span<const double> rollout_adv);

/// The mode-aware assignment: prefix tokens carry a_t or a_v by the
/// rollout's mode, all later tokens carry the rollout-level advantage.
AdvantageAssignment assign_token_advantages(const RolloutGroup& group, const ModeAdvantage& adv,
                                            std::span<const double> rollout_adv);

/// Every token of rollout j carries rollout_adv[j] (plain GRPO).
AdvantageAssignment uniform_token_advantages(std::span<const std::size_t> token_counts,
                                             std::span<const double> rollout_adv);

}  // namespace adagrpo
