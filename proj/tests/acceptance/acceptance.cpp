// End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero exit
// if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "adagrpo/commands.hpp"
#include "adagrpo/config.hpp"
#include "adagrpo/evaluation.hpp"
#include "checks.hpp"

using namespace adagrpo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> families_preferring(const EnvironmentSpec& env, ModeId mode) {
  std::vector<std::string> out;
  for (const auto& f : env.families) {
    if (f.better_mode() == mode) out.push_back(f.name);
  }
  return out;
}

const ProbeStats& final_probe(const std::vector<IterationRecord>& records, const std::string& family) {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    for (const auto& p : it->probes) {
      if (p.family == family) return p;
    }
  }
  throw std::runtime_error("no probe recorded for " + family);
}

struct Trained {
  TrainOutcome outcome;
  EvalReport report;
  double seconds = 0.0;
};

Trained train_and_evaluate(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  Trained t;
  t.outcome = run_training(cfg, std::nullopt);
  const auto tasks = make_eval_tasks(cfg.env, cfg.schedule, static_cast<std::size_t>(cfg.eval_tasks), cfg.seed);
  t.report = evaluate(t.outcome.params, cfg.env, tasks, cfg.seed);
  t.seconds = seconds_since(start);
  return t;
}

void print_selection(const EvalReport& r) {
  for (const auto& f : r.families) {
    std::printf("    %-9s correct-mode %.4f  grd%% %.4f  adaptive %.4f  txt %.4f  grd %.4f  upper %.4f\n",
                f.family.c_str(), f.correct_mode_rate, f.grd_proportion, f.accuracy_adaptive, f.accuracy_txt,
                f.accuracy_grd, f.accuracy_upper_bound);
  }
  const auto& o = r.overall;
  std::printf("    overall   adaptive %.4f  txt %.4f  grd %.4f  upper %.4f  grd%% %.4f\n", o.accuracy_adaptive,
              o.accuracy_txt, o.accuracy_grd, o.accuracy_upper_bound, o.grd_proportion);
}

bool criterion_1() {
  const auto start = Clock::now();
  const auto r = advantage_check(100, 1000000, 1);
  const double secs = seconds_since(start);
  double worst_margin = 0.0;
  int passing = 0;
  for (const auto& t : r.trials) {
    worst_margin = std::max(worst_margin, t.error / t.bound);
    passing += t.pass ? 1 : 0;
  }
  std::printf("  %d/%zu trials within bound (worst error/bound %.3f), max |a_t + a_v - 1| = %.2e, %.1f s\n",
              passing, r.trials.size(), worst_margin, r.max_sum_error, secs);
  return r.pass && r.max_sum_error <= 1e-12 && secs < 60.0;
}

bool criterion_2() {
  const auto start = Clock::now();
  const auto g = checks::gradient_check(50, 1e-5, 2);
  const double secs = seconds_since(start);
  std::printf("  %d instances, max relative error %.3e, %d dead-zone tokens, exact zero: %s, %.2f s\n",
              g.instances, g.max_relative_error, g.dead_zone_tokens, g.dead_zone_exact_zero ? "yes" : "no", secs);
  return g.instances == 50 && g.max_relative_error < 1e-4 && g.dead_zone_tokens > 0 && g.dead_zone_exact_zero &&
         secs < 30.0;
}

bool criterion_3() {
  const auto r = checks::grpo_reduction_check(20, 3);
  std::printf("  %d groups, max objective diff %.3e, max gradient diff %.3e\n", r.groups, r.max_objective_diff,
              r.max_gradient_diff);
  return r.groups == 20 && r.max_objective_diff <= 1e-10 && r.max_gradient_diff <= 1e-10;
}

bool criterion_4() {
  const ExperimentConfig cfg;
  const Trained t = train_and_evaluate(cfg);
  print_selection(t.report);
  bool selection = true;
  for (const char* name : {"SYM-EASY", "VIS-EASY"}) {
    selection = selection && t.report.family(name).correct_mode_rate >= 0.9;
  }
  const auto& o = t.report.overall;
  const bool adaptive = o.accuracy_adaptive >= std::max(o.accuracy_txt, o.accuracy_grd) - 0.02;
  bool upper = true;
  for (const auto& f : t.report.families) upper = upper && f.accuracy_upper_bound >= f.accuracy_adaptive;
  upper = upper && o.accuracy_upper_bound >= o.accuracy_adaptive;
  std::printf("  (a) selection >= 0.9: %s  (b) adaptive >= best forced - 0.02: %s  (c) upper >= adaptive: %s  "
              "%.1f s\n",
              selection ? "yes" : "no", adaptive ? "yes" : "no", upper ? "yes" : "no", t.seconds);

  // Diagnostic only: the same run with uncentered mode advantages.
  ExperimentConfig raw = cfg;
  raw.trainer.center_mode_advantage = false;
  const Trained u = train_and_evaluate(raw);
  std::printf("  [diagnostic] uncentered mode advantages: correct-mode SYM-EASY %.4f VIS-EASY %.4f, adaptive %.4f\n",
              u.report.family("SYM-EASY").correct_mode_rate, u.report.family("VIS-EASY").correct_mode_rate,
              u.report.overall.accuracy_adaptive);
  return selection && adaptive && upper && t.seconds < 300.0;
}

bool criterion_5() {
  ExperimentConfig cfg;
  cfg.sft.grd_share = 0.9;
  const auto sym = families_preferring(cfg.env, ModeId::TXT);
  bool pass = true;
  for (Variant v : {Variant::GRPO_FREE, Variant::ADAGRPO}) {
    ExperimentConfig c = cfg;
    c.trainer.variant = v;
    const Trained t = train_and_evaluate(c);
    const auto probes = make_probe_set(c.env, c.schedule, c.trainer.probe_tasks_per_family, c.seed);
    const auto initial = run_probes(t.outcome.initial, c.env, probes, c.trainer.temperature);
    std::printf("  %-10s", std::string(to_string(v)).c_str());
    for (const auto& name : sym) {
      const double before =
          std::find_if(initial.begin(), initial.end(), [&](const ProbeStats& p) { return p.family == name; })->grd_prop;
      const double after = final_probe(t.outcome.records, name).grd_prop;
      std::printf("  %s P(GRD) %.3f -> %.3f (eval grd%% %.3f)", name.c_str(), before, after,
                  t.report.family(name).grd_proportion);
      pass = pass && (v == Variant::GRPO_FREE ? after > 0.8 : after < 0.2);
    }
    std::printf("\n");
  }
  return pass;
}

bool criterion_6() {
  const ExperimentConfig base;
  const std::vector<std::string> families{"SYM-EASY", "VIS-EASY"};
  int satisfied = 0;
  const int seeds = 5;
  for (int k = 0; k < seeds; ++k) {
    std::array<std::optional<int>, 2> reached;
    for (bool curriculum : {true, false}) {
      ExperimentConfig c = base;
      c.seed = base.seed + static_cast<std::uint64_t>(k);
      c.trainer.curriculum = curriculum;
      reached[curriculum ? 0 : 1] = iterations_to_selection(run_training(c, std::nullopt).records, families);
    }
    const auto& [on, off] = reached;
    const bool ok = !off || (on && *off >= 1.25 * std::max(*on, 1));
    satisfied += ok ? 1 : 0;
    auto show = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("never"); };
    std::printf("  seed %llu: curriculum on %s, off %s -> %s\n",
                static_cast<unsigned long long>(base.seed + static_cast<std::uint64_t>(k)), show(on).c_str(),
                show(off).c_str(), ok ? "later or never" : "not later");
  }
  std::printf("  %d/%d seeds\n", satisfied, seeds);
  return 2 * satisfied > seeds;
}

bool criterion_7() {
  const std::string cmd = std::string("\"") + ADAGRPO_UNIT_TESTS_PATH + "\" --test-suite=invariants 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return false;
  std::string output;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
  const int status = pclose(pipe);
  std::smatch m;
  const std::regex summary(R"(test cases:\s*(\d+)\s*\|\s*(\d+) passed\s*\|\s*(\d+) failed)");
  if (!std::regex_search(output, m, summary)) {
    std::printf("%s", output.c_str());
    return false;
  }
  const int total = std::stoi(m[1]), passed = std::stoi(m[2]), failed = std::stoi(m[3]);
  std::printf("  %d invariant test cases, %d passed, %d failed\n", total, passed, failed);
  return status == 0 && total > 0 && failed == 0 && passed == total;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<bool()>>> criteria{
      {"1 mode-relative advantage vs Monte Carlo", criterion_1},
      {"2 surrogate gradient vs finite differences", criterion_2},
      {"3 reduction to GRPO", criterion_3},
      {"4 adaptive mode learning", criterion_4},
      {"5 mode-collapse ablation", criterion_5},
      {"6 curriculum effect", criterion_6},
      {"7 invariant suite", criterion_7},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    std::printf("criterion %s\n", name);
    std::fflush(stdout);
    bool pass = false;
    try {
      pass = run();
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
    }
    std::printf("%s criterion %s\n", pass ? "PASS" : "FAIL", name);
    std::fflush(stdout);
    failures += pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
