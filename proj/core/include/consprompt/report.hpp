#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consprompt/trainer.hpp"

namespace consprompt {

/// Accuracy in percent with one decimal, e.g. 0.773 -> "77.3".
std::string format_percent(double accuracy);

/// "mean (std)" in percent, e.g. "77.3 (3.6)".
std::string format_mean_std(const Summary& summary);

/// One line-delimited JSON record per event.
std::string step_record(const StepLosses& losses, std::uint64_t seed, std::size_t grid_index);
std::string eval_record(const EvalRecord& eval, std::uint64_t seed, std::size_t grid_index);
std::string seed_record(const SeedResult& result);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(std::string_view json_text);

/// Row of a loss-ratio sweep: t = a = weight.
struct RatioRow {
  double weight = 0.0;
  Summary summary;
};

/// Columns: t,a | Average (acc.) | Variance (+std) | Median (acc.)
std::string render_ratio_table(std::span<const RatioRow> rows);
std::string ratio_table_json(std::span<const RatioRow> rows);

/// Row of a K-shot sweep with one summary per sampling strategy.
struct KShotRow {
  std::size_t k = 0;
  Summary sim;
  Summary label;
};

/// Columns: K | Sim Acc(+std) | Sim Median | Label Acc(+std) | Label Median
std::string render_kshot_table(std::span<const KShotRow> rows);
std::string kshot_table_json(std::span<const KShotRow> rows);

/// Single-run summary table: one line per seed plus the aggregate.
std::string render_run_report(const ExperimentReport& report);

}  // namespace consprompt
