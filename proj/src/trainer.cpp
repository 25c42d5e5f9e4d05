#include "adagrpo/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "adagrpo/reward.hpp"

namespace adagrpo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::ADAGRPO:
      return "ADAGRPO";
    case Variant::GRPO_FREE:
      return "GRPO_FREE";
    case Variant::PGEXP_ONLY:
      return "PGEXP_ONLY";
  }
  throw std::logic_error("unknown variant");
}

Variant parse_variant(std::string_view text) {
  if (text == "ADAGRPO") return Variant::ADAGRPO;
  if (text == "GRPO_FREE") return Variant::GRPO_FREE;
  if (text == "PGEXP_ONLY") return Variant::PGEXP_ONLY;
  throw std::invalid_argument("unknown variant '" + std::string(text) +
                              "' (expected ADAGRPO, GRPO_FREE or PGEXP_ONLY)");
}

std::string_view to_string(ReferencePolicy r) { return r == ReferencePolicy::Initial ? "initial" : "old"; }

ReferencePolicy parse_reference(std::string_view text) {
  if (text == "initial") return ReferencePolicy::Initial;
  if (text == "old") return ReferencePolicy::Old;
  throw std::invalid_argument("unknown reference policy '" + std::string(text) +
                              "' (expected initial or old)");
}

void TrainerConfig::validate() const {
  if (n < 1) throw std::invalid_argument("trainer.n must be >= 1");
  if (!(clip_eps > 0.0)) throw std::invalid_argument("trainer.clip_eps must be > 0");
  if (!(kl_coef >= 0.0)) throw std::invalid_argument("trainer.kl_coef must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("trainer.temperature must be > 0");
  if (!(lr >= 0.0)) throw std::invalid_argument("trainer.lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("trainer.momentum must be in [0, 1)");
  if (iterations < 0) throw std::invalid_argument("trainer.iterations must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("trainer.inner_epochs must be >= 1");
  if (!(format_weight >= 0.0)) throw std::invalid_argument("trainer.format_weight must be >= 0");
  if (probe_every < 1) throw std::invalid_argument("trainer.probe_every must be >= 1");
  if (probe_tasks_per_family < 1) throw std::invalid_argument("trainer.probe_tasks_per_family must be >= 1");
}

void SftConfig::validate() const {
  if (demos_per_family < 1) throw std::invalid_argument("sft.demos_per_family must be >= 1");
  if (!(grd_share >= 0.0 && grd_share <= 1.0)) throw std::invalid_argument("sft.grd_share must be in [0, 1]");
  if (steps < 0) throw std::invalid_argument("sft.steps must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("sft.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sft.momentum must be in [0, 1)");
}

std::vector<RolloutSequence> sample_group(const PolicyParameters& params, const Task& task,
                                          Variant variant, int n, double temperature, Rng& rng) {
  const SamplingOptions sampling{temperature, false};
  std::vector<RolloutSequence> rollouts;
  rollouts.reserve(static_cast<std::size_t>(2 * n));
  if (forces_prefixes(variant)) {
    for (ModeId mode : kModes) {
      for (int k = 0; k < n; ++k) rollouts.push_back(sample_rollout(params, task.ctx, sampling, mode, rng));
    }
  } else {
    for (int k = 0; k < 2 * n; ++k) {
      rollouts.push_back(sample_rollout(params, task.ctx, sampling, std::nullopt, rng));
    }
  }
  return rollouts;
}

std::vector<double> score_group(const std::vector<RolloutSequence>& rollouts, const Task& task,
                                double format_weight) {
  const std::string gold = answer_label(task.gold);
  std::vector<double> rewards;
  rewards.reserve(rollouts.size());
  for (const auto& r : rollouts) rewards.push_back(total_reward(r.text, gold, format_weight).total);
  return rewards;
}

GroupAdvantages compute_group_advantages(Variant variant,
                                         const std::vector<RolloutSequence>& rollouts,
                                         const std::vector<double>& rewards, int n,
                                         bool center_mode_advantage) {
  GroupAdvantages out;
  out.rollout = rollout_advantages(rewards);
  if (variant == Variant::ADAGRPO) {
    RolloutGroup group;
    group.n = n;
    group.rollouts = rollouts;
    group.rewards = rewards;
    validate_group(group);
    const std::span<const double> all(rewards);
    const ModeAdvantage adv = mode_relative_advantage(all.first(static_cast<std::size_t>(n)),
                                                      all.subspan(static_cast<std::size_t>(n)));
    out.tokens = assign_token_advantages(group, center_mode_advantage ? centered(adv) : adv, out.rollout);
    out.mode = adv;
  } else {
    std::vector<std::size_t> counts;
    counts.reserve(rollouts.size());
    for (const auto& r : rollouts) counts.push_back(r.num_tokens());
    out.tokens = uniform_token_advantages(counts, out.rollout);
  }
  return out;
}

std::vector<SurrogateSample> surrogate_batch(const Task& task,
                                             const std::vector<RolloutSequence>& rollouts,
                                             const AdvantageAssignment& tokens) {
  if (tokens.size() != rollouts.size()) throw std::invalid_argument("surrogate_batch: misaligned advantages");
  std::vector<SurrogateSample> batch;
  batch.reserve(rollouts.size());
  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    batch.push_back({task.ctx, rollouts[j].mode, rollouts[j].answer, tokens[j]});
  }
  return batch;
}

IterationResult run_iteration(const PolicyParameters& params, const PolicyParameters& old_params,
                              const PolicyParameters& ref_params, const Task& task,
                              const TrainerConfig& config, Rng& rng) {
  config.validate();
  IterationRecord rec;
  rec.family = task.family;

  const auto rollouts = sample_group(old_params, task, config.variant, config.n, config.temperature, rng);
  const auto rewards = score_group(rollouts, task, config.format_weight);
  const GroupAdvantages adv =
      compute_group_advantages(config.variant, rollouts, rewards, config.n, config.center_mode_advantage);

  rec.group_rewards = rewards;
  std::vector<double> by_mode[2];
  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    rec.group_modes.push_back(rollouts[j].mode);
    by_mode[mode_index(rollouts[j].mode)].push_back(rewards[j]);
  }
  rec.reward_txt = by_mode[0].empty() ? kNaN : mean_variance(by_mode[0]).mean;
  rec.reward_grd = by_mode[1].empty() ? kNaN : mean_variance(by_mode[1]).mean;
  if (adv.mode) {
    rec.a_t = adv.mode->a_t;
    rec.a_v = adv.mode->a_v;
  } else if (!by_mode[0].empty() && !by_mode[1].empty()) {
    const ModeAdvantage diag = mode_relative_advantage(by_mode[0], by_mode[1]);
    rec.a_t = diag.a_t;
    rec.a_v = diag.a_v;
  } else {
    rec.a_t = kNaN;
    rec.a_v = kNaN;
  }

  const auto batch = surrogate_batch(task, rollouts, adv.tokens);
  const SurrogateOptions options{config.clip_eps, config.kl_coef};
  MomentumStep step(config.lr, config.momentum);
  PolicyParameters current = params;
  for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
    const SurrogateResult res = surrogate_objective(current, old_params, ref_params, batch, options);
    if (epoch == 0) {
      rec.objective = res.objective;
      rec.kl = res.kl;
      rec.grad_norm = res.gradient.norm();
    }
    current = step.apply(current, res.gradient, /*ascent=*/true);
  }
  if (!current.all_finite()) throw NumericalError("parameters became non-finite after the update");
  return {std::move(current), std::move(rec)};
}

ProbeSet make_probe_set(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                        int tasks_per_family, std::uint64_t seed) {
  ProbeSet probes;
  probes.families = schedule.families();
  const double difficulty = schedule.phases.back().difficulty;
  Rng rng = make_stream(seed, "probe");
  for (const auto& name : probes.families) {
    for (int k = 0; k < tasks_per_family; ++k) {
      probes.tasks.push_back(generate_task(env, env.family(name), difficulty, rng,
                                           static_cast<std::uint64_t>(k)));
    }
  }
  return probes;
}

std::vector<ProbeStats> run_probes(const PolicyParameters& params, const EnvironmentSpec& env,
                                   const ProbeSet& probes, double temperature) {
  std::vector<ProbeStats> out;
  for (const auto& name : probes.families) {
    const auto better = env.family(name).better_mode();
    double grd = 0.0;
    double correct = 0.0;
    int count = 0;
    for (const Task& t : probes.tasks) {
      if (t.family != name) continue;
      grd += grd_probability(params, t.ctx, temperature);
      const Eigen::Vector2d logits = mode_logits(params, t.ctx);
      const ModeId greedy = logits[1] > logits[0] ? ModeId::GRD : ModeId::TXT;
      if (better && greedy == *better) correct += 1.0;
      ++count;
    }
    ProbeStats s;
    s.family = name;
    s.grd_prop = count ? grd / count : kNaN;
    s.correct_mode_rate = (better && count) ? correct / count : kNaN;
    out.push_back(std::move(s));
  }
  return out;
}

TrainResult train(const TrainerConfig& config, const EnvironmentSpec& env,
                  const CurriculumSchedule& schedule, const PolicyParameters& initial,
                  std::uint64_t seed, const RecordSink& sink) {
  config.validate();
  env.validate();
  schedule.validate(env);
  if (config.curriculum && schedule.total_iterations() < config.iterations) {
    throw std::invalid_argument("schedule budget " + std::to_string(schedule.total_iterations()) +
                                " is shorter than trainer.iterations " +
                                std::to_string(config.iterations));
  }
  const CurriculumSchedule active = config.curriculum ? schedule : flat_schedule(schedule, config.iterations);
  const std::uint64_t env_seed = derive_seed(seed, "env");
  Rng rollout_rng = make_stream(seed, "policy");
  const ProbeSet probes = make_probe_set(env, schedule, config.probe_tasks_per_family, seed);

  TrainResult result{initial, {}};
  result.records.reserve(static_cast<std::size_t>(config.iterations));
  const PolicyParameters reference = initial;
  double last_grd = 0.0;
  {
    const auto initial_probe = run_probes(initial, env, probes, config.temperature);
    for (const auto& p : initial_probe) last_grd += p.grd_prop / static_cast<double>(initial_probe.size());
  }

  for (int it = 0; it < config.iterations; ++it) {
    const auto task = sample_task(env, active, it, env_seed);
    if (!task) break;
    const PolicyParameters old_params = result.params;
    const PolicyParameters& ref = config.reference == ReferencePolicy::Initial ? reference : old_params;
    IterationResult step;
    try {
      step = run_iteration(result.params, old_params, ref, *task, config, rollout_rng);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    result.params = std::move(step.params);
    IterationRecord& rec = step.record;
    rec.iteration = it;
    rec.phase = *active.phase_at(it);
    rec.phase_name = active.phases[rec.phase].name;
    if (it % config.probe_every == 0 || it + 1 == config.iterations) {
      rec.probes = run_probes(result.params, env, probes, config.temperature);
      last_grd = 0.0;
      for (const auto& p : rec.probes) last_grd += p.grd_prop / static_cast<double>(rec.probes.size());
    }
    rec.grd_prop = last_grd;
    if (sink) sink(rec);
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<Demonstration> cold_start_demonstrations(const SftConfig& config,
                                                     const EnvironmentSpec& env,
                                                     const CurriculumSchedule& schedule,
                                                     std::uint64_t seed) {
  config.validate();
  Rng rng = make_stream(seed, "sft");
  const int grd_count = static_cast<int>(std::lround(config.grd_share * config.demos_per_family));
  const int txt_count = config.demos_per_family - grd_count;
  std::vector<Demonstration> demos;
  for (const auto& name : schedule.families()) {
    const TaskFamilySpec& family = env.family(name);
    for (ModeId mode : kModes) {
      const int count = mode == ModeId::TXT ? txt_count : grd_count;
      if (count == 0) continue;
      auto part = oracle_demonstrations(env, family, mode, static_cast<std::size_t>(count), 1.0, rng);
      demos.insert(demos.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  }
  return demos;
}

PolicyParameters cold_start(const SftConfig& config, const EnvironmentSpec& env,
                            const CurriculumSchedule& schedule, const PolicyParameters& initial,
                            std::uint64_t seed) {
  const auto demos = cold_start_demonstrations(config, env, schedule, seed);
  MomentumStep step(config.lr, config.momentum);
  PolicyParameters params = initial;
  for (int s = 0; s < config.steps; ++s) {
    params = step.apply(params, sft_gradient(params, demos), /*ascent=*/false);
  }
  return params;
}

}  // namespace adagrpo
