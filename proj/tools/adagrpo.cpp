// Command-line entry point: train, eval, ablate, advantage-check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adagrpo/commands.hpp"
#include "adagrpo/config.hpp"
#include "adagrpo/metrics.hpp"

namespace {

using namespace adagrpo;

// Errors go to stderr as one JSON object on one line.
int fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return kind == "usage" ? 2 : 1;
}

ExperimentConfig resolve(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  if (path) return load_config(*path, overrides);
  std::istringstream empty;
  return parse_config(empty, overrides);
}

void print_eval(const EvalReport& r) {
  std::printf("%-10s %6s %9s %9s %9s %9s %6s\n", "family", "count", "adaptive", "txt", "grd", "upper", "grd%");
  auto row = [](const FamilyReport& f) {
    std::printf("%-10s %6zu %9.4f %9.4f %9.4f %9.4f %6.3f\n", f.family.c_str(), f.count, f.accuracy_adaptive,
                f.accuracy_txt, f.accuracy_grd, f.accuracy_upper_bound, f.grd_proportion);
  };
  for (const auto& f : r.families) row(f);
  row(r.overall);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive mode selection with AdaGRPO on a synthetic two-mode environment"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "INI config file (defaults when omitted)");
    cmd->add_option("-s,--set", overrides, "Override a key: section.key=value (repeatable)");
    cmd->add_option("-o,--out", out_dir, "Output directory (overrides experiment.output_dir)");
  };

  auto* train = app.add_subcommand("train", "SFT cold start then RL; writes metrics, checkpoint, config");
  add_config(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out tasks");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "policy.ckpt to evaluate")->required();
  add_config(eval);

  auto* ablate = app.add_subcommand("ablate", "Variant x curriculum matrix with a shared seed");
  int jobs = 1;
  add_config(ablate);
  ablate->add_option("-j,--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("advantage-check", "Closed-form mode advantage vs Monte Carlo");
  int trials = 100;
  long long draws = 1000000;
  std::uint64_t seed = 1;
  std::optional<std::string> report_path;
  check->add_option("--trials", trials, "Random reward configurations")->check(CLI::PositiveNumber);
  check->add_option("--draws", draws, "Monte Carlo draws per trial")->check(CLI::PositiveNumber);
  check->add_option("--seed", seed, "Seed");
  check->add_option("--json", report_path, "Also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (train->parsed() || eval->parsed() || ablate->parsed()) {
      ExperimentConfig config = resolve(config_path, overrides);
      if (out_dir) config.output_dir = *out_dir;
      if (train->parsed()) {
        const auto outcome = run_training(config, std::filesystem::path(config.output_dir));
        const auto& last = outcome.records.back();
        std::printf("trained %zu iterations; final grd_prop %s; outputs in %s\n", outcome.records.size(),
                    format_number(last.grd_prop).c_str(), config.output_dir.c_str());
      } else if (eval->parsed()) {
        print_eval(run_evaluation(checkpoint, config, config.output_dir));
      } else {
        const auto cells = run_ablation(config, config.output_dir, jobs);
        for (const auto& c : cells) {
          std::printf("%-32s adaptive %.4f grd%% %.3f to90 %s\n", c.run_dir.c_str(), c.eval.overall.accuracy_adaptive,
                      c.eval.overall.grd_proportion,
                      c.iterations_to_90 ? std::to_string(*c.iterations_to_90).c_str() : "-");
        }
      }
      return 0;
    }

    const auto report = advantage_check(trials, draws, seed);
    std::printf("%5s %9s %9s %9s %9s %12s %12s %10s %10s %s\n", "trial", "mu_t", "mu_v", "sigma_t", "sigma_v", "a_v",
                "mc", "|err|", "bound", "");
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t k = 0; k < report.trials.size(); ++k) {
      const auto& t = report.trials[k];
      std::printf("%5zu %9.4f %9.4f %9.4f %9.4f %12.8f %12.8f %10.2e %10.2e %s\n", k, t.mu_t, t.mu_v, t.sigma_t,
                  t.sigma_v, t.a_v, t.monte_carlo, t.error, t.bound, t.pass ? "ok" : "FAIL");
      j.push_back({{"mu_t", t.mu_t}, {"mu_v", t.mu_v}, {"sigma_t", t.sigma_t}, {"sigma_v", t.sigma_v},
                   {"a_t", t.a_t}, {"a_v", t.a_v}, {"monte_carlo", t.monte_carlo}, {"std_error", t.std_error},
                   {"bound", t.bound}, {"error", t.error}, {"pass", t.pass}});
    }
    std::printf("max |a_t + a_v - 1| = %.3e\n%s\n", report.max_sum_error, report.pass ? "PASS" : "FAIL");
    if (report_path) {
      std::ofstream out(*report_path);
      out << nlohmann::json{{"seed", seed}, {"draws", draws}, {"trials", j},
                            {"max_sum_error", report.max_sum_error}, {"pass", report.pass}}
                 .dump(2)
          << '\n';
      if (!out) return fail("io", "cannot write '" + *report_path + "'");
    }
    return report.pass ? 0 : 1;
  } catch (const ConfigError& e) {
    return fail("config", e.what());
  } catch (const NumericalError& e) {
    return fail("numerical", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
}
