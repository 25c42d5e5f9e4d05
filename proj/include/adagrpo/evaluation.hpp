#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adagrpo/environment.hpp"
#include "adagrpo/policy.hpp"

namespace adagrpo {

struct FamilyReport {
  std::string family;
  std::size_t count = 0;
  double accuracy_adaptive = 0.0;
  double accuracy_txt = 0.0;
  double accuracy_grd = 0.0;
  double accuracy_upper_bound = 0.0;
  double grd_proportion = 0.0;
  /// Share of tasks where the greedy prefix is the family's better mode;
  /// NaN when the family has no better mode.
  double correct_mode_rate = 0.0;
};

struct EvalReport {
  std::vector<FamilyReport> families;
  FamilyReport overall;
  std::uint64_t seed = 0;

  const FamilyReport& family(const std::string& name) const;
};

/// Greedy decoding three ways on each task: adaptive, forced TXT, forced
/// GRD. A task counts for the upper bound when either forced mode is right.
/// Families are reported in environment order.
EvalReport evaluate(const PolicyParameters& params, const EnvironmentSpec& env,
                    const std::vector<Task>& tasks, std::uint64_t seed = 0);

/// Held-out tasks from the schedule's last phase, drawn from the "eval"
/// stream so they never coincide with training or probe draws.
std::vector<Task> make_eval_tasks(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                                  std::size_t count, std::uint64_t seed);

struct ModeSwitchResult {
  std::string answer;  // kNoAnswer when both attempts failed
  ModeId mode = ModeId::TXT;
  bool retried = false;
  int correct = 0;
};

inline constexpr const char* kNoAnswer = "<no-answer>";

/// Decodes in the adaptively chosen mode; when no answer segment appears
/// within `max_len` steps, decodes once more with the other mode forced.
ModeSwitchResult infer_with_mode_switch(const PolicyParameters& params, const FreeFormatHead& head,
                                        const Task& task, int max_len,
                                        const SamplingOptions& options, Rng& rng);

}  // namespace adagrpo
