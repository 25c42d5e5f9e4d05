#include "adagrpo/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <variant>

#include "adagrpo/format.hpp"
#include "adagrpo/reward.hpp"

namespace adagrpo {

namespace {

struct Tally {
  std::size_t count = 0;
  std::size_t adaptive = 0;
  std::size_t txt = 0;
  std::size_t grd = 0;
  std::size_t upper = 0;
  std::size_t chose_grd = 0;
  std::size_t mode_eligible = 0;
  std::size_t mode_correct = 0;

  FamilyReport report(std::string name) const {
    auto frac = [&](std::size_t k) { return count ? static_cast<double>(k) / count : 0.0; };
    FamilyReport r;
    r.family = std::move(name);
    r.count = count;
    r.accuracy_adaptive = frac(adaptive);
    r.accuracy_txt = frac(txt);
    r.accuracy_grd = frac(grd);
    r.accuracy_upper_bound = frac(upper);
    r.grd_proportion = frac(chose_grd);
    r.correct_mode_rate = mode_eligible ? static_cast<double>(mode_correct) / mode_eligible
                                        : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
};

int greedy_answer(const PolicyParameters& params, ModeId mode, const ContextFeatures& ctx) {
  Eigen::Index best = 0;
  answer_logits(params, mode, ctx).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

const FamilyReport& EvalReport::family(const std::string& name) const {
  auto it = std::find_if(families.begin(), families.end(),
                         [&](const FamilyReport& r) { return r.family == name; });
  if (it == families.end()) throw std::out_of_range("no report for family '" + name + "'");
  return *it;
}

EvalReport evaluate(const PolicyParameters& params, const EnvironmentSpec& env,
                    const std::vector<Task>& tasks, std::uint64_t seed) {
  if (tasks.empty()) throw std::invalid_argument("evaluate: no tasks");
  std::vector<std::string> order;
  std::map<std::string, Tally> per_family;
  Tally overall;

  for (const Task& task : tasks) {
    const Eigen::Vector2d logits = mode_logits(params, task.ctx);
    const ModeId chosen = logits[1] > logits[0] ? ModeId::GRD : ModeId::TXT;
    const int txt_ok = grade(task, greedy_answer(params, ModeId::TXT, task.ctx));
    const int grd_ok = grade(task, greedy_answer(params, ModeId::GRD, task.ctx));
    const int adaptive_ok = chosen == ModeId::TXT ? txt_ok : grd_ok;
    const auto better = env.family(task.family).better_mode();

    for (Tally* t : {&per_family[task.family], &overall}) {
      ++t->count;
      t->adaptive += adaptive_ok;
      t->txt += txt_ok;
      t->grd += grd_ok;
      t->upper += (txt_ok || grd_ok) ? 1 : 0;
      t->chose_grd += chosen == ModeId::GRD ? 1 : 0;
      if (better) {
        ++t->mode_eligible;
        t->mode_correct += chosen == *better ? 1 : 0;
      }
    }
  }

  EvalReport report;
  report.seed = seed;
  for (const auto& spec : env.families) {
    if (per_family.contains(spec.name)) order.push_back(spec.name);
  }
  for (const auto& name : order) report.families.push_back(per_family[name].report(name));
  report.overall = overall.report("overall");
  return report;
}

std::vector<Task> make_eval_tasks(const EnvironmentSpec& env, const CurriculumSchedule& schedule,
                                  std::size_t count, std::uint64_t seed) {
  if (schedule.phases.empty()) throw std::invalid_argument("make_eval_tasks: empty schedule");
  Rng rng = make_stream(seed, "eval");
  return sample_tasks(env, schedule.phases.back(), count, rng);
}

ModeSwitchResult infer_with_mode_switch(const PolicyParameters& params, const FreeFormatHead& head,
                                        const Task& task, int max_len,
                                        const SamplingOptions& options, Rng& rng) {
  const std::string gold = answer_label(task.gold);
  auto attempt = [&](std::optional<ModeId> forced) -> std::pair<ModeId, std::optional<std::string>> {
    const FreeFormatDecode d = decode_free_format(params, head, task.ctx, forced, max_len, options, rng);
    const ParseResult parsed = parse_response(d.text);
    if (const auto* resp = std::get_if<ParsedResponse>(&parsed)) return {d.mode, resp->answer};
    return {d.mode, std::nullopt};
  };

  ModeSwitchResult out;
  auto [mode, answer] = attempt(std::nullopt);
  out.mode = mode;
  if (!answer) {
    out.retried = true;
    std::tie(out.mode, answer) = attempt(other_mode(mode));
  }
  out.answer = answer.value_or(kNoAnswer);
  out.correct = answer ? accuracy_reward(out.answer, gold) : 0;
  return out;
}

}  // namespace adagrpo
