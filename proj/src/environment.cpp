#include "adagrpo/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adagrpo {

std::optional<ModeId> TaskFamilySpec::better_mode() const {
  if (signal_sym > signal_vis) return ModeId::TXT;
  if (signal_vis > signal_sym) return ModeId::GRD;
  return std::nullopt;
}

const TaskFamilySpec& EnvironmentSpec::family(const std::string& name) const {
  auto it = std::find_if(families.begin(), families.end(),
                         [&](const TaskFamilySpec& f) { return f.name == name; });
  if (it == families.end()) throw std::invalid_argument("unknown task family '" + name + "'");
  return *it;
}

bool EnvironmentSpec::has_family(const std::string& name) const {
  return std::any_of(families.begin(), families.end(),
                     [&](const TaskFamilySpec& f) { return f.name == name; });
}

void EnvironmentSpec::validate() const {
  if (answers < 2) throw std::invalid_argument("environment: answer alphabet must have >= 2 symbols");
  if (!(cue_noise >= 0.0)) throw std::invalid_argument("environment: cue_noise must be >= 0");
  if (families.empty()) throw std::invalid_argument("environment: no task families");
  for (std::size_t i = 0; i < families.size(); ++i) {
    const auto& f = families[i];
    if (f.name.empty()) throw std::invalid_argument("environment: family with empty name");
    if (!(f.signal_sym >= 0.0) || !(f.signal_vis >= 0.0)) {
      throw std::invalid_argument("family " + f.name + ": signals must be >= 0");
    }
    if (!(f.noise_std > 0.0)) throw std::invalid_argument("family " + f.name + ": noise_std must be > 0");
    for (std::size_t k = 0; k < i; ++k) {
      if (families[k].name == f.name) throw std::invalid_argument("duplicate family " + f.name);
    }
  }
}

int CurriculumSchedule::total_iterations() const {
  int total = 0;
  for (const auto& p : phases) total += p.iterations;
  return total;
}

std::optional<std::size_t> CurriculumSchedule::phase_at(int iteration) const {
  if (iteration < 0) return std::nullopt;
  int end = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    end += phases[i].iterations;
    if (iteration < end) return i;
  }
  return std::nullopt;
}

void CurriculumSchedule::validate(const EnvironmentSpec& env) const {
  if (phases.empty()) throw std::invalid_argument("schedule: no phases");
  for (const auto& p : phases) {
    if (p.iterations <= 0) throw std::invalid_argument("phase " + p.name + ": budget must be positive");
    if (!(p.difficulty > 0.0)) throw std::invalid_argument("phase " + p.name + ": difficulty must be > 0");
    if (p.mixture.empty()) throw std::invalid_argument("phase " + p.name + ": empty mixture");
    double sum = 0.0;
    for (const auto& [name, w] : p.mixture) {
      if (!env.has_family(name)) {
        throw std::invalid_argument("phase " + p.name + ": unknown family '" + name + "'");
      }
      if (!(w >= 0.0)) throw std::invalid_argument("phase " + p.name + ": negative weight");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("phase " + p.name + ": mixture weights sum to " +
                                  std::to_string(sum) + ", expected 1");
    }
  }
}

std::vector<std::string> CurriculumSchedule::families() const {
  std::vector<std::string> out;
  for (const auto& p : phases) {
    for (const auto& entry : p.mixture) {
      if (std::find(out.begin(), out.end(), entry.first) == out.end()) out.push_back(entry.first);
    }
  }
  return out;
}

EnvironmentSpec default_environment() {
  EnvironmentSpec env;
  env.families = {
      {"SYM-EASY", 2.0, 0.0, 1.0}, {"VIS-EASY", 0.0, 2.0, 1.0}, {"SYM-HARD", 1.0, 0.3, 1.0},
      {"VIS-HARD", 0.3, 1.0, 1.0}, {"MIXED", 0.8, 0.8, 1.0},
  };
  return env;
}

CurriculumSchedule default_schedule() {
  CurriculumSchedule s;
  s.phases.push_back({"binary", {{"SYM-EASY", 0.5}, {"VIS-EASY", 0.5}}, 1.0, 500});
  s.phases.push_back({"diverse",
                      {{"SYM-EASY", 0.2},
                       {"VIS-EASY", 0.2},
                       {"SYM-HARD", 0.2},
                       {"VIS-HARD", 0.2},
                       {"MIXED", 0.2}},
                      1.5,
                      1500});
  return s;
}

CurriculumSchedule flat_schedule(const CurriculumSchedule& schedule, int iterations) {
  if (schedule.phases.empty()) throw std::invalid_argument("flat_schedule: no phases");
  CurriculumSchedule flat;
  CurriculumPhase phase = schedule.phases.back();
  phase.iterations = iterations;
  flat.phases.push_back(std::move(phase));
  return flat;
}

Task generate_task(const EnvironmentSpec& env, const TaskFamilySpec& family, double difficulty,
                   Rng& rng, std::uint64_t id) {
  std::uniform_int_distribution<int> pick(0, env.answers - 1);
  std::normal_distribution<double> noise(0.0, family.noise_std * difficulty);
  std::normal_distribution<double> cue_noise(0.0, env.cue_noise * difficulty);

  Task task;
  task.family = family.name;
  task.id = id;
  task.difficulty = difficulty;
  task.gold = pick(rng);
  task.ctx.sym = Eigen::VectorXd::Zero(env.answers);
  task.ctx.vis = Eigen::VectorXd::Zero(env.answers);
  task.ctx.sym[task.gold] = family.signal_sym;
  task.ctx.vis[task.gold] = family.signal_vis;
  for (int k = 0; k < env.answers; ++k) task.ctx.sym[k] += noise(rng);
  for (int k = 0; k < env.answers; ++k) task.ctx.vis[k] += noise(rng);
  task.ctx.cue = Eigen::Vector2d(family.signal_sym, family.signal_vis);
  if (env.cue_noise > 0.0) {
    for (int k = 0; k < 2; ++k) task.ctx.cue[k] += cue_noise(rng);
  }
  return task;
}

namespace {

const TaskFamilySpec& draw_family(const EnvironmentSpec& env, const CurriculumPhase& phase, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  for (const auto& [name, w] : phase.mixture) {
    cumulative += w;
    if (u < cumulative) return env.family(name);
  }
  // Rounding in the weights: fall back to the last family with weight.
  for (auto it = phase.mixture.rbegin(); it != phase.mixture.rend(); ++it) {
    if (it->second > 0.0) return env.family(it->first);
  }
  throw std::invalid_argument("phase " + phase.name + " has no family with positive weight");
}

}  // namespace

std::optional<Task> sample_task(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                                int iteration, std::uint64_t seed) {
  const auto phase = schedule.phase_at(iteration);
  if (!phase) return std::nullopt;
  Rng rng(derive_seed(seed, "task/" + std::to_string(iteration)));
  const CurriculumPhase& p = schedule.phases[*phase];
  const TaskFamilySpec& family = draw_family(env, p, rng);
  return generate_task(env, family, p.difficulty, rng, static_cast<std::uint64_t>(iteration));
}

std::vector<Task> sample_tasks(const EnvironmentSpec& env, const CurriculumPhase& phase,
                               std::size_t count, Rng& rng) {
  std::vector<Task> tasks;
  tasks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const TaskFamilySpec& family = draw_family(env, phase, rng);
    tasks.push_back(generate_task(env, family, phase.difficulty, rng, i));
  }
  return tasks;
}

int grade(const Task& task, int answer) {
  if (answer < 0 || answer >= static_cast<int>(task.ctx.sym.size())) {
    throw std::invalid_argument("grade: answer " + std::to_string(answer) + " outside alphabet");
  }
  return answer == task.gold ? 1 : 0;
}

int bayes_answer(const Eigen::VectorXd& channel, double signal, Rng& rng) {
  if (signal > 0.0) {
    Eigen::Index best = 0;
    channel.maxCoeff(&best);
    return static_cast<int>(best);
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(channel.size()) - 1);
  return pick(rng);
}

std::vector<Demonstration> oracle_demonstrations(const EnvironmentSpec& env,
                                                 const TaskFamilySpec& family, ModeId mode,
                                                 std::size_t count, double difficulty, Rng& rng) {
  std::vector<Demonstration> demos;
  demos.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Task task = generate_task(env, family, difficulty, rng, i);
    const bool txt = mode == ModeId::TXT;
    const int label = bayes_answer(txt ? task.ctx.sym : task.ctx.vis,
                                   txt ? family.signal_sym : family.signal_vis, rng);
    demos.push_back({std::move(task.ctx), mode, label});
  }
  return demos;
}

}  // namespace adagrpo
