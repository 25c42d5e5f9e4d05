#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adagrpo/policy.hpp"
#include "adagrpo/rng.hpp"

namespace adagrpo {

/// A synthetic task family. The gold answer shows up in a channel as
/// `signal * one_hot(gold)` under Gaussian noise, so the two modes see
/// different amounts of evidence.
struct TaskFamilySpec {
  std::string name;
  double signal_sym = 0.0;
  double signal_vis = 0.0;
  double noise_std = 1.0;

  /// TXT when the symbolic channel carries the stronger signal, GRD when
  /// the visual one does, nothing on a tie.
  std::optional<ModeId> better_mode() const;
};

struct EnvironmentSpec {
  int answers = 4;
  double cue_noise = 0.25;
  std::vector<TaskFamilySpec> families;

  PolicyDims policy_dims() const { return {answers, answers, answers, 2}; }
  const TaskFamilySpec& family(const std::string& name) const;
  bool has_family(const std::string& name) const;
  /// Throws std::invalid_argument on the first broken invariant.
  void validate() const;
};

struct Task {
  std::string family;
  std::uint64_t id = 0;
  ContextFeatures ctx;
  int gold = 0;  // zero-based
  double difficulty = 1.0;
};

struct CurriculumPhase {
  std::string name;
  std::vector<std::pair<std::string, double>> mixture;
  double difficulty = 1.0;
  int iterations = 0;
};

struct CurriculumSchedule {
  std::vector<CurriculumPhase> phases;

  int total_iterations() const;
  /// Index of the phase active at `iteration`, empty past the budget.
  std::optional<std::size_t> phase_at(int iteration) const;
  void validate(const EnvironmentSpec& env) const;
  /// Every family named in any phase, in first-appearance order.
  std::vector<std::string> families() const;
};

/// SYM-EASY and VIS-EASY, plus SYM-HARD, VIS-HARD and MIXED.
EnvironmentSpec default_environment();
/// Binary mixture at difficulty 1.0, then all five families at 1.5.
CurriculumSchedule default_schedule();
/// Curriculum off: the last phase's mixture and difficulty for `iterations`.
CurriculumSchedule flat_schedule(const CurriculumSchedule& schedule, int iterations);

/// Features are signal * one_hot(gold) + N(0, (noise_std * difficulty)^2)
/// per channel. The cue holds (signal_sym, signal_vis) under
/// N(0, (cue_noise * difficulty)^2): what the question reveals about which
/// channel matters, with nothing about the answer.
Task generate_task(const EnvironmentSpec& env, const TaskFamilySpec& family, double difficulty,
                   Rng& rng, std::uint64_t id = 0);

/// Deterministic in (schedule, iteration, seed). Empty once the schedule is
/// exhausted.
std::optional<Task> sample_task(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                                int iteration, std::uint64_t seed);

/// Held-out tasks drawn from the mixture and difficulty of one phase.
std::vector<Task> sample_tasks(const EnvironmentSpec& env, const CurriculumPhase& phase,
                               std::size_t count, Rng& rng);

int grade(const Task& task, int answer);

/// Bayes-optimal answer from one channel: argmax when the channel carries
/// signal, otherwise a uniform guess.
int bayes_answer(const Eigen::VectorXd& channel, double signal, Rng& rng);

/// SFT demonstrations for one family and mode, labeled with the Bayes
/// answer computed from that mode's visible channel.
std::vector<Demonstration> oracle_demonstrations(const EnvironmentSpec& env,
                                                 const TaskFamilySpec& family, ModeId mode,
                                                 std::size_t count, double difficulty, Rng& rng);

}  // namespace adagrpo
