#include "adagrpo/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "adagrpo/advantage.hpp"
#include "adagrpo/metrics.hpp"
#include "adagrpo/rng.hpp"

namespace adagrpo {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string cell_name(Variant v, bool curriculum) {
  return std::string(to_string(v)) + (curriculum ? "-curriculum-on" : "-curriculum-off");
}

std::vector<double> random_rewards(Rng& rng, int kind) {
  std::uniform_int_distribution<int> size(2, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = size(rng);
  std::vector<double> out(static_cast<std::size_t>(n));
  switch (kind) {
    case 0: {  // accuracy-only rewards
      const double p = unit(rng);
      for (double& r : out) r = unit(rng) < p ? 1.0 : 0.0;
      break;
    }
    case 1: {  // format bonus: {0, w, 1 + w}
      const double w = 0.5 * unit(rng);
      const double p_format = unit(rng);
      const double p_correct = unit(rng);
      for (double& r : out) {
        const bool fmt = unit(rng) < p_format;
        r = fmt ? w + (unit(rng) < p_correct ? 1.0 : 0.0) : 0.0;
      }
      break;
    }
    default: {  // continuous rewards
      std::normal_distribution<double> draw(unit(rng), 0.05 + unit(rng));
      for (double& r : out) r = draw(rng);
    }
  }
  return out;
}

}  // namespace

TrainOutcome run_training(const ExperimentConfig& config, const std::optional<fs::path>& dir) {
  config.validate();
  if (dir) {
    fs::create_directories(*dir);
    write_text(*dir / "config.resolved", render_config(config));
  }
  TrainOutcome outcome;
  outcome.initial = PolicyParameters::zeros(config.env.policy_dims());
  if (config.sft.enabled) {
    outcome.initial = cold_start(config.sft, config.env, config.schedule, outcome.initial, config.seed);
  }

  std::optional<MetricsWriter> writer;
  if (dir) writer.emplace(*dir, config.seed);
  RecordSink sink;
  if (writer) sink = [&](const IterationRecord& r) { writer->write(r); };
  TrainResult result = train(config.trainer, config.env, config.schedule, outcome.initial, config.seed, sink);
  outcome.params = std::move(result.params);
  outcome.records = std::move(result.records);

  if (dir) {
    writer->close();
    std::ofstream ckpt(*dir / "policy.ckpt", std::ios::binary | std::ios::trunc);
    if (!ckpt) throw std::runtime_error("cannot write '" + (*dir / "policy.ckpt").string() + "'");
    write_checkpoint(ckpt, {outcome.params, config.seed});
  }
  return outcome;
}

EvalReport run_evaluation(const fs::path& checkpoint, const ExperimentConfig& config, const fs::path& dir) {
  config.validate();
  std::ifstream in(checkpoint);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + checkpoint.string() + "'");
  const Checkpoint ckpt = read_checkpoint(in);
  const PolicyDims expected = config.env.policy_dims();
  const PolicyDims got = ckpt.params.dims();
  if (got.answers != expected.answers || got.sym != expected.sym || got.vis != expected.vis ||
      got.cue != expected.cue) {
    throw std::runtime_error("checkpoint '" + checkpoint.string() + "' does not match the environment dimensions");
  }
  const auto tasks = make_eval_tasks(config.env, config.schedule, static_cast<std::size_t>(config.eval_tasks),
                                     config.seed);
  const EvalReport report = evaluate(ckpt.params, config.env, tasks, config.seed);

  fs::create_directories(dir);
  nlohmann::json j = eval_report_to_json(report, render_config(config));
  j["checkpoint"] = checkpoint.string();
  j["checkpoint_seed"] = ckpt.seed;
  write_text(dir / "eval.json", j.dump(2) + "\n");
  write_text(dir / "eval.csv", eval_report_csv(report));
  return report;
}

std::optional<int> iterations_to_selection(const std::vector<IterationRecord>& records,
                                           const std::vector<std::string>& families, double threshold) {
  for (const auto& rec : records) {
    if (rec.probes.empty()) continue;
    bool all = true;
    for (const auto& name : families) {
      auto it = std::find_if(rec.probes.begin(), rec.probes.end(),
                             [&](const ProbeStats& p) { return p.family == name; });
      if (it == rec.probes.end()) throw std::invalid_argument("no probe for family '" + name + "'");
      if (!(it->correct_mode_rate >= threshold)) all = false;
    }
    if (all) return rec.iteration;
  }
  return std::nullopt;
}

std::vector<AblationCell> run_ablation(const ExperimentConfig& config, const fs::path& root, int jobs) {
  config.validate();
  if (jobs < 1) throw std::invalid_argument("ablate: jobs must be >= 1");
  std::vector<AblationCell> cells;
  for (Variant v : {Variant::ADAGRPO, Variant::PGEXP_ONLY, Variant::GRPO_FREE}) {
    for (bool curriculum : {true, false}) {
      AblationCell cell;
      cell.variant = v;
      cell.curriculum = curriculum;
      cell.run_dir = cell_name(v, curriculum);
      cells.push_back(std::move(cell));
    }
  }
  fs::create_directories(root);
  const std::vector<std::string> selection_families = [&] {
    std::vector<std::string> names;
    for (const auto& [name, w] : config.schedule.phases.front().mixture) {
      if (w > 0.0 && config.env.family(name).better_mode()) names.push_back(name);
    }
    return names;
  }();

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        AblationCell& cell = cells[i];
        ExperimentConfig c = config;
        c.trainer.variant = cell.variant;
        c.trainer.curriculum = cell.curriculum;
        c.output_dir = (root / cell.run_dir).string();
        const TrainOutcome out = run_training(c, fs::path(c.output_dir));
        const auto tasks = make_eval_tasks(c.env, c.schedule, static_cast<std::size_t>(c.eval_tasks), c.seed);
        cell.eval = evaluate(out.params, c.env, tasks, c.seed);
        nlohmann::json j = eval_report_to_json(cell.eval, render_config(c));
        write_text(fs::path(c.output_dir) / "eval.json", j.dump(2) + "\n");
        write_text(fs::path(c.output_dir) / "eval.csv", eval_report_csv(cell.eval));
        for (auto it = out.records.rbegin(); it != out.records.rend(); ++it) {
          if (!it->probes.empty()) {
            cell.final_probes = it->probes;
            break;
          }
        }
        cell.iterations_to_90 = iterations_to_selection(out.records, selection_families);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::min<int>(jobs, static_cast<int>(cells.size()));
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const auto families = config.schedule.families();
  std::string csv =
      "variant,curriculum,run_dir,seed,accuracy_adaptive,accuracy_txt,accuracy_grd,accuracy_upper_bound,"
      "grd_proportion,iterations_to_90";
  for (const auto& f : families) csv += ",probe_grd_prop:" + f;
  csv += '\n';
  for (const auto& cell : cells) {
    const FamilyReport& o = cell.eval.overall;
    csv += std::string(to_string(cell.variant)) + ',' + (cell.curriculum ? "on" : "off") + ',' + cell.run_dir +
           ',' + std::to_string(config.seed);
    for (double v : {o.accuracy_adaptive, o.accuracy_txt, o.accuracy_grd, o.accuracy_upper_bound, o.grd_proportion}) {
      csv += ',' + format_number(v);
    }
    csv += ',' + (cell.iterations_to_90 ? std::to_string(*cell.iterations_to_90) : std::string());
    for (const auto& f : families) {
      auto it = std::find_if(cell.final_probes.begin(), cell.final_probes.end(),
                             [&](const ProbeStats& p) { return p.family == f; });
      csv += ',' + (it == cell.final_probes.end() ? std::string() : format_number(it->grd_prop));
    }
    csv += '\n';
  }
  write_text(root / "summary.csv", csv);
  write_text(root / "config.resolved", render_config(config));
  return cells;
}

AdvantageCheckReport advantage_check(int trials, long long draws, std::uint64_t seed) {
  if (trials < 1 || draws < 1) throw std::invalid_argument("advantage-check: trials and draws must be > 0");
  AdvantageCheckReport report;
  report.pass = true;
  Rng config_rng = make_stream(seed, "advantage-check");
  for (int k = 0; k < trials; ++k) {
    std::vector<double> txt;
    std::vector<double> grd;
    if (k == 0) {
      txt.assign(4, 1.0);
      grd.assign(4, 1.0);
    } else {
      txt = random_rewards(config_rng, k % 3);
      grd = random_rewards(config_rng, k % 3);
    }
    const ModeAdvantage adv = mode_relative_advantage(txt, grd);

    AdvantageTrial t;
    t.mu_t = adv.txt.mean;
    t.mu_v = adv.grd.mean;
    t.sigma_t = std::sqrt(adv.txt.variance);
    t.sigma_v = std::sqrt(adv.grd.variance);
    t.a_t = adv.a_t;
    t.a_v = adv.a_v;

    Rng mc = make_stream(seed, "advantage-check/mc/" + std::to_string(k));
    std::normal_distribution<double> z(0.0, 1.0);
    long long wins2 = 0;  // twice the win count, so ties add one
    for (long long d = 0; d < draws; ++d) {
      const double x_v = t.mu_v + t.sigma_v * z(mc);
      const double x_t = t.mu_t + t.sigma_t * z(mc);
      wins2 += x_v > x_t ? 2 : (x_v == x_t ? 1 : 0);
    }
    const double n = static_cast<double>(draws);
    t.monte_carlo = static_cast<double>(wins2) / (2.0 * n);
    t.std_error = std::sqrt(t.monte_carlo * (1.0 - t.monte_carlo) / n);
    t.bound = 3.0 * t.std_error + 1e-3;
    t.error = std::abs(t.a_v - t.monte_carlo);
    t.pass = t.error < t.bound;
    report.max_sum_error = std::max(report.max_sum_error, std::abs(t.a_t + t.a_v - 1.0));
    report.pass = report.pass && t.pass;
    report.trials.push_back(t);
  }
  report.pass = report.pass && report.max_sum_error <= 1e-12;
  return report;
}

}  // namespace adagrpo
