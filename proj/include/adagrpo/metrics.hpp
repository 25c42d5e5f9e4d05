#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "adagrpo/evaluation.hpp"
#include "adagrpo/trainer.hpp"

namespace adagrpo {

inline constexpr std::string_view kMetricsCsvHeader =
    "iteration,reward_txt,reward_grd,a_t,a_v,grd_prop,objective,grad_norm,phase";

inline constexpr std::string_view kEvalCsvHeader =
    "family,count,accuracy_adaptive,accuracy_txt,accuracy_grd,accuracy_upper_bound,grd_proportion,"
    "correct_mode_rate,seed";

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

/// One metrics.csv data row (no newline). `phase` is the phase name.
std::string metrics_csv_row(const IterationRecord& record);

/// JSON form of an iteration record; NaN fields become null.
nlohmann::json record_to_json(const IterationRecord& record, std::uint64_t seed);

/// Streams metrics.csv and metrics.jsonl side by side into `dir`.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& dir, std::uint64_t seed);
  void write(const IterationRecord& record);
  void close();

 private:
  std::ofstream csv_;
  std::ofstream jsonl_;
  std::uint64_t seed_;
};

nlohmann::json eval_report_to_json(const EvalReport& report, const std::string& resolved_config);
std::string eval_report_csv(const EvalReport& report);

}  // namespace adagrpo
