#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xsection/pipeline.hpp"

namespace xs {

inline constexpr int kReportSchemaVersion = 1;

struct StrategyCells {
  std::optional<double> return_pct;
  std::optional<double> risk_pct;
  std::optional<double> r_over_r;
};

struct MonthlyPoint {
  MonthId month;
  std::optional<double> corr;
  double tertile_direction = 0.0;
  double quintile_direction = 0.0;
  double mse = 0.0;
  double ls_tertile = 0.0;
  double ls_quintile = 0.0;
};

// One line of the summary table; `error` is set when the pattern failed.
struct ReportRow {
  std::string name;
  std::string error;
  std::size_t months = 0;
  double corr = 0.0;
  double tertile_pct = 0.0;
  double tertile_p = 1.0;
  std::string tertile_stars;
  double quintile_pct = 0.0;
  double quintile_p = 1.0;
  std::string quintile_stars;
  double mse = 0.0;
  StrategyCells tertile;
  StrategyCells quintile;
  std::vector<MonthlyPoint> monthly;

  bool ok() const { return error.empty(); }
};

struct GroupRow {
  std::string name;  // e.g. DNN8_Avg
  std::vector<std::string> members;
  double corr = 0.0;
  double tertile_pct = 0.0;
  double quintile_pct = 0.0;
  double mse = 0.0;
};

struct RunReport {
  int schema_version = kReportSchemaVersion;
  std::vector<ReportRow> rows;
  std::vector<GroupRow> groups;
};

ReportRow make_row(const ExperimentResult& result);
RunReport make_report(const std::vector<ExperimentResult>& results);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);  // throws Parse

std::string report_csv(const RunReport& report);
std::string scores_csv(const ScoreSheet& sheet);
std::string monthly_csv(const ReportRow& row);

// Aligned text table in the column order
// name, CORR, tertile %, quintile %, MSE, return %, risk %, R/R.
std::string render_table(const RunReport& report);

// Running sum of monthly long-short returns per successful pattern, one line
// per prediction month.
std::string cumulative_ls_csv(const RunReport& report);

}  // namespace xs
