#include "consprompt/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "consprompt/errors.hpp"

namespace consprompt {

using nlohmann::ordered_json;

std::string format_percent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", accuracy * 100.0);
  return buf;
}

std::string format_mean_std(const Summary& summary) {
  return format_percent(summary.mean) + " (" + format_percent(summary.stddev) + ")";
}

std::string step_record(const StepLosses& l, std::uint64_t seed, std::size_t grid_index) {
  ordered_json j;
  j["type"] = "step";
  j["seed"] = seed;
  j["grid"] = grid_index;
  j["step"] = l.step;
  j["l_ce"] = l.l_ce;
  j["l_bc"] = l.l_bc;
  j["l_pc"] = l.l_pc;
  j["total"] = l.total;
  j["anchors"] = l.anchors;
  j["skipped_bc"] = l.skipped_bc;
  j["skipped_pc"] = l.skipped_pc;
  j["fallback_bc"] = l.fallback_bc;
  j["fallback_pc"] = l.fallback_pc;
  j["grad_norm"] = l.grad_norm;
  return j.dump();
}

std::string eval_record(const EvalRecord& e, std::uint64_t seed, std::size_t grid_index) {
  ordered_json j;
  j["type"] = "eval";
  j["seed"] = seed;
  j["grid"] = grid_index;
  j["step"] = e.step;
  j["dev_accuracy"] = e.dev_accuracy;
  return j.dump();
}

namespace {

ordered_json seed_json(const SeedResult& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["best_grid_index"] = r.best_grid_index;
  j["dev_accuracy"] = r.dev_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["grid_dev_accuracies"] = r.grid_dev_accuracies;
  j["skipped_bc"] = r.skipped_bc;
  j["skipped_pc"] = r.skipped_pc;
  return j;
}

ordered_json summary_json(const Summary& s) {
  ordered_json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["std"] = s.stddev;
  j["median"] = s.median;
  j["min"] = s.min;
  j["max"] = s.max;
  return j;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string seed_record(const SeedResult& result) {
  auto j = seed_json(result);
  ordered_json out;
  out["type"] = "seed_result";
  for (auto& [k, v] : j.items()) out[k] = v;
  return out.dump();
}

std::string report_to_json(const ExperimentReport& report) {
  ordered_json j;
  j["format"] = "consprompt-report/1";
  j["seeds"] = ordered_json::array();
  for (const auto& s : report.seeds) j["seeds"].push_back(seed_json(s));
  j["summary"] = summary_json(report.summary);
  return j.dump(2) + "\n";
}

ExperimentReport report_from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  if (j.value("format", "") != "consprompt-report/1") throw DataError("not a run report");
  ExperimentReport r;
  for (const auto& s : j.at("seeds")) {
    SeedResult sr;
    sr.seed = s.at("seed").get<std::uint64_t>();
    sr.best_grid_index = s.at("best_grid_index").get<std::size_t>();
    sr.dev_accuracy = s.at("dev_accuracy").get<double>();
    sr.test_accuracy = s.at("test_accuracy").get<double>();
    sr.grid_dev_accuracies = s.at("grid_dev_accuracies").get<std::vector<double>>();
    sr.skipped_bc = s.at("skipped_bc").get<std::size_t>();
    sr.skipped_pc = s.at("skipped_pc").get<std::size_t>();
    r.seeds.push_back(std::move(sr));
  }
  // The summary is always recomputed from the per-seed accuracies.
  r.summary = summarize(r.test_accuracies());
  return r;
}

std::string render_ratio_table(std::span<const RatioRow> rows) {
  std::ostringstream out;
  out << pad("t,a", 8) << pad("Average", 10) << pad("Variance", 10) << "Median\n";
  out << pad("", 8) << pad("(acc.)", 10) << pad("(+std)", 10) << "(acc.)\n";
  for (const auto& r : rows) {
    std::ostringstream w;
    w << r.weight;
    out << pad(w.str(), 8) << pad(format_percent(r.summary.mean), 10)
        << pad(format_percent(r.summary.stddev), 10) << format_percent(r.summary.median)
        << "\n";
  }
  return out.str();
}

std::string ratio_table_json(std::span<const RatioRow> rows) {
  ordered_json j;
  j["format"] = "consprompt-ratio-table/1";
  j["columns"] = {"t,a", "Average", "Variance", "Median"};
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["t,a"] = r.weight;
    row["Average"] = r.summary.mean;
    row["Variance"] = r.summary.stddev;
    row["Median"] = r.summary.median;
    row["min"] = r.summary.min;
    row["max"] = r.summary.max;
    row["seeds"] = r.summary.count;
    j["rows"].push_back(row);
  }
  return j.dump(2) + "\n";
}

std::string render_kshot_table(std::span<const KShotRow> rows) {
  std::ostringstream out;
  out << pad("", 6) << pad("Sim-based", 26) << "Label-based\n";
  out << pad("K", 6) << pad("Acc(+std)", 14) << pad("Median", 12) << pad("Acc(+std)", 14)
      << "Median\n";
  for (const auto& r : rows) {
    out << pad(std::to_string(r.k), 6) << pad(format_mean_std(r.sim), 14)
        << pad(format_percent(r.sim.median), 12) << pad(format_mean_std(r.label), 14)
        << format_percent(r.label.median) << "\n";
  }
  return out.str();
}

std::string kshot_table_json(std::span<const KShotRow> rows) {
  ordered_json j;
  j["format"] = "consprompt-kshot-table/1";
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["K"] = r.k;
    row["sim"] = summary_json(r.sim);
    row["label"] = summary_json(r.label);
    j["rows"].push_back(row);
  }
  return j.dump(2) + "\n";
}

std::string render_run_report(const ExperimentReport& report) {
  std::ostringstream out;
  out << pad("seed", 8) << pad("grid", 6) << pad("dev", 8) << pad("test", 8)
      << "skipped(bc/pc)\n";
  for (const auto& s : report.seeds) {
    out << pad(std::to_string(s.seed), 8) << pad(std::to_string(s.best_grid_index), 6)
        << pad(format_percent(s.dev_accuracy), 8) << pad(format_percent(s.test_accuracy), 8)
        << s.skipped_bc << "/" << s.skipped_pc << "\n";
  }
  out << "test accuracy: " << format_mean_std(report.summary)
      << "  median " << format_percent(report.summary.median) << "\n";
  return out.str();
}

}  // namespace consprompt
