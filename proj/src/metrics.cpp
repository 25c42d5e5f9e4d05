#include "adagrpo/metrics.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace adagrpo {

namespace {

nlohmann::json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::json family_json(const FamilyReport& r) {
  return {{"family", r.family},
          {"count", r.count},
          {"accuracy_adaptive", r.accuracy_adaptive},
          {"accuracy_txt", r.accuracy_txt},
          {"accuracy_grd", r.accuracy_grd},
          {"accuracy_upper_bound", r.accuracy_upper_bound},
          {"grd_proportion", r.grd_proportion},
          {"correct_mode_rate", number_or_null(r.correct_mode_rate)}};
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

std::string metrics_csv_row(const IterationRecord& r) {
  std::string row = std::to_string(r.iteration);
  for (double v : {r.reward_txt, r.reward_grd, r.a_t, r.a_v, r.grd_prop, r.objective, r.grad_norm}) {
    row += ',';
    row += format_number(v);
  }
  row += ',';
  row += r.phase_name;
  return row;
}

nlohmann::json record_to_json(const IterationRecord& r, std::uint64_t seed) {
  nlohmann::json modes = nlohmann::json::array();
  for (ModeId m : r.group_modes) modes.push_back(std::string(mode_name(m)));
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : r.probes) {
    probes.push_back({{"family", p.family},
                      {"grd_prop", p.grd_prop},
                      {"correct_mode_rate", number_or_null(p.correct_mode_rate)}});
  }
  return {{"seed", seed},
          {"iteration", r.iteration},
          {"family", r.family},
          {"phase", r.phase},
          {"phase_name", r.phase_name},
          {"group_rewards", r.group_rewards},
          {"group_modes", modes},
          {"reward_txt", number_or_null(r.reward_txt)},
          {"reward_grd", number_or_null(r.reward_grd)},
          {"a_t", number_or_null(r.a_t)},
          {"a_v", number_or_null(r.a_v)},
          {"grd_prop", number_or_null(r.grd_prop)},
          {"objective", number_or_null(r.objective)},
          {"kl", number_or_null(r.kl)},
          {"grad_norm", number_or_null(r.grad_norm)},
          {"probes", probes}};
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, std::uint64_t seed)
    : csv_(open_for_write(dir / "metrics.csv")), jsonl_(open_for_write(dir / "metrics.jsonl")), seed_(seed) {
  csv_ << kMetricsCsvHeader << '\n';
}

void MetricsWriter::write(const IterationRecord& record) {
  csv_ << metrics_csv_row(record) << '\n';
  jsonl_ << record_to_json(record, seed_).dump() << '\n';
  if (!csv_ || !jsonl_) throw std::runtime_error("failed writing metrics");
}

void MetricsWriter::close() {
  csv_.close();
  jsonl_.close();
}

nlohmann::json eval_report_to_json(const EvalReport& report, const std::string& resolved_config) {
  nlohmann::json families = nlohmann::json::array();
  for (const auto& f : report.families) families.push_back(family_json(f));
  return {{"seed", report.seed},
          {"families", families},
          {"overall", family_json(report.overall)},
          {"config", resolved_config}};
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out(kEvalCsvHeader);
  out += '\n';
  auto row = [&](const FamilyReport& f) {
    out += f.family + ',' + std::to_string(f.count);
    for (double v : {f.accuracy_adaptive, f.accuracy_txt, f.accuracy_grd, f.accuracy_upper_bound,
                     f.grd_proportion, f.correct_mode_rate}) {
      out += ',' + format_number(v);
    }
    out += ',' + std::to_string(report.seed) + '\n';
  };
  for (const auto& f : report.families) row(f);
  row(report.overall);
  return out;
}

}  // namespace adagrpo
