#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adagrpo/advantage.hpp"
#include "adagrpo/environment.hpp"
#include "adagrpo/policy.hpp"

namespace adagrpo {

/// ADAGRPO: forced prefixes, mode-relative advantage on prefix tokens.
/// GRPO_FREE: free sampling, rollout advantage on every token.
/// PGEXP_ONLY: forced prefixes, rollout advantage on every token.
enum class Variant { ADAGRPO, GRPO_FREE, PGEXP_ONLY };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
inline bool forces_prefixes(Variant v) { return v != Variant::GRPO_FREE; }

enum class ReferencePolicy { Initial, Old };

std::string_view to_string(ReferencePolicy r);
ReferencePolicy parse_reference(std::string_view text);

struct TrainerConfig {
  int n = 4;
  double clip_eps = 0.2;
  double kl_coef = 0.04;
  double temperature = kDefaultTemperature;
  double lr = 0.05;
  double momentum = 0.0;
  int iterations = 2000;
  int inner_epochs = 1;
  Variant variant = Variant::ADAGRPO;
  bool curriculum = true;
  bool center_mode_advantage = true;
  double format_weight = 0.0;
  ReferencePolicy reference = ReferencePolicy::Initial;
  int probe_every = 10;
  int probe_tasks_per_family = 50;

  void validate() const;
};

struct SftConfig {
  bool enabled = true;
  int demos_per_family = 200;
  double grd_share = 0.5;  // fraction of demonstrations in GRD mode
  int steps = 200;
  double lr = 0.1;
  double momentum = 0.0;

  void validate() const;
};

/// Monitoring snapshot of the free-sampling mode choice on one family.
struct ProbeStats {
  std::string family;
  double grd_prop = 0.0;            // mean P(GRD | ctx) at the sampling temperature
  double correct_mode_rate = 0.0;   // greedy choice equals the better mode; NaN on ties
};

struct IterationRecord {
  int iteration = 0;
  std::string family;
  std::size_t phase = 0;
  std::string phase_name;
  std::vector<double> group_rewards;
  std::vector<ModeId> group_modes;
  double reward_txt = 0.0;  // NaN when no rollout used the mode
  double reward_grd = 0.0;
  double a_t = 0.0;  // win probabilities in [0, 1]; NaN unless both modes were sampled
  double a_v = 0.0;
  double grd_prop = 0.0;  // last probe value
  double objective = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  std::vector<ProbeStats> probes;  // filled on probe iterations only
};

/// Samples the group: n forced TXT then n forced GRD rollouts, or 2n free
/// ones for GRPO_FREE. Rollouts are drawn from `params`.
std::vector<RolloutSequence> sample_group(const PolicyParameters& params, const Task& task,
                                          Variant variant, int n, double temperature, Rng& rng);

std::vector<double> score_group(const std::vector<RolloutSequence>& rollouts, const Task& task,
                                double format_weight);

struct GroupAdvantages {
  std::vector<double> rollout;
  std::optional<ModeAdvantage> mode;  // ADAGRPO only; win probabilities before any centering
  AdvantageAssignment tokens;
};

GroupAdvantages compute_group_advantages(Variant variant,
                                         const std::vector<RolloutSequence>& rollouts,
                                         const std::vector<double>& rewards, int n,
                                         bool center_mode_advantage);

std::vector<SurrogateSample> surrogate_batch(const Task& task,
                                             const std::vector<RolloutSequence>& rollouts,
                                             const AdvantageAssignment& tokens);

struct IterationResult {
  PolicyParameters params;
  IterationRecord record;
};

/// One AdaGRPO (or ablation) update on a single task: sample from
/// `old_params`, score, assign advantages, and take `inner_epochs`
/// clipped-surrogate ascent steps starting from `params`.
IterationResult run_iteration(const PolicyParameters& params, const PolicyParameters& old_params,
                              const PolicyParameters& ref_params, const Task& task,
                              const TrainerConfig& config, Rng& rng);

/// Fixed tasks used to monitor mode selection without touching training.
struct ProbeSet {
  std::vector<Task> tasks;
  std::vector<std::string> families;
};

ProbeSet make_probe_set(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                        int tasks_per_family, std::uint64_t seed);
std::vector<ProbeStats> run_probes(const PolicyParameters& params, const EnvironmentSpec& env,
                                   const ProbeSet& probes, double temperature);

struct TrainResult {
  PolicyParameters params;
  std::vector<IterationRecord> records;
};

using RecordSink = std::function<void(const IterationRecord&)>;

/// RL stage. Tasks follow the schedule (or its last phase when the
/// curriculum is off); the old policy is refreshed every iteration and the
/// reference is the initial policy unless configured otherwise.
TrainResult train(const TrainerConfig& config, const EnvironmentSpec& env,
                  const CurriculumSchedule& schedule, const PolicyParameters& initial,
                  std::uint64_t seed, const RecordSink& sink = {});

/// Demonstrations from every family of the schedule, split by `grd_share`.
std::vector<Demonstration> cold_start_demonstrations(const SftConfig& config,
                                                     const EnvironmentSpec& env,
                                                     const CurriculumSchedule& schedule,
                                                     std::uint64_t seed);

/// Supervised cold start from zero weights (or `initial`).
PolicyParameters cold_start(const SftConfig& config, const EnvironmentSpec& env,
                            const CurriculumSchedule& schedule, const PolicyParameters& initial,
                            std::uint64_t seed);

}  // namespace adagrpo
