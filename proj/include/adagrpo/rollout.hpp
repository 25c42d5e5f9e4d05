#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adagrpo/format.hpp"

namespace adagrpo {

/// One sampled generation: a mode prefix token followed by an answer token.
/// `logprobs` holds the per-token log-probabilities under the sampling policy
/// (temperature 1), prefix first.
struct RolloutSequence {
  ModeId mode = ModeId::TXT;
  int answer = 0;  // zero-based answer token index
  std::vector<double> logprobs;
  bool forced_prefix = false;
  std::string text;

  std::size_t num_tokens() const { return logprobs.size(); }
};

/// The 2n rollouts for one task: indices [0, n) carry the TXT prefix and
/// [n, 2n) the GRD prefix.
struct RolloutGroup {
  std::string task_id;
  int n = 0;
  std::vector<RolloutSequence> rollouts;
  std::vector<double> rewards;
};

/// Throws std::invalid_argument unless the group has exactly n rollouts per
/// mode in TXT-then-GRD order and one reward per rollout.
void validate_group(const RolloutGroup& group);

}  // namespace adagrpo
