#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adagrpo/config.hpp"
#include "adagrpo/evaluation.hpp"
#include "adagrpo/policy.hpp"
#include "adagrpo/trainer.hpp"

namespace adagrpo {

struct TrainOutcome {
  PolicyParameters initial;  // after the cold start (zeros when SFT is disabled)
  PolicyParameters params;
  std::vector<IterationRecord> records;
};

/// SFT cold start (if enabled) followed by RL. Writes config.resolved,
/// metrics.csv, metrics.jsonl and policy.ckpt into `dir` when given.
TrainOutcome run_training(const ExperimentConfig& config,
                          const std::optional<std::filesystem::path>& dir);

/// Loads a checkpoint, evaluates it on `config.eval_tasks` held-out tasks
/// and writes eval.json and eval.csv into `dir`.
EvalReport run_evaluation(const std::filesystem::path& checkpoint, const ExperimentConfig& config,
                          const std::filesystem::path& dir);

/// First probe iteration at which every listed family reaches `threshold`
/// correct-mode rate; nullopt if never.
std::optional<int> iterations_to_selection(const std::vector<IterationRecord>& records,
                                           const std::vector<std::string>& families,
                                           double threshold = 0.9);

struct AblationCell {
  Variant variant = Variant::ADAGRPO;
  bool curriculum = true;
  std::string run_dir;  // relative to the ablation root
  EvalReport eval;
  std::vector<ProbeStats> final_probes;
  std::optional<int> iterations_to_90;
};

/// Variant x curriculum matrix with a shared seed. Each cell gets its own
/// run directory; summary.csv merges them. Cells run on up to `jobs` threads.
std::vector<AblationCell> run_ablation(const ExperimentConfig& config, const std::filesystem::path& root,
                                       int jobs = 1);

struct AdvantageTrial {
  double mu_t = 0.0, mu_v = 0.0, sigma_t = 0.0, sigma_v = 0.0;
  double a_t = 0.0, a_v = 0.0;
  double monte_carlo = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  double error = 0.0;  // |a_v - monte_carlo|
  bool pass = false;
};

struct AdvantageCheckReport {
  std::vector<AdvantageTrial> trials;
  double max_sum_error = 0.0;  // max |a_t + a_v - 1|
  bool pass = false;
};

/// Compares the closed-form a_v against a Monte Carlo estimate of
/// P(X_v > X_t) (ties count one half) on random reward groups. The first
/// trial is always the degenerate equal-reward case.
AdvantageCheckReport advantage_check(int trials, long long draws, std::uint64_t seed);

}  // namespace adagrpo
