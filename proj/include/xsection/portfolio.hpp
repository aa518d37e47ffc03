#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "xsection/metrics.hpp"
#include "xsection/month.hpp"

namespace xs {

struct LsMonthReturn {
  MonthId month;
  double long_return = 0.0;   // equal-weight mean of the top bucket
  double short_return = 0.0;  // equal-weight mean of the bottom bucket
  double ls_return = 0.0;     // long_return - short_return
  std::size_t long_size = 0;
  std::size_t short_size = 0;
  bool degenerate = false;    // buckets decided by tie-break only
};

// Net-zero book: long the top bucket, short the bottom bucket, no costs.
LsMonthReturn ls_month(MonthId month, const ScoreMap& scores, const ScoreMap& returns, Bucket bucket);

struct StrategySummary {
  double return_pct = 0.0;  // 12 * mean monthly ls * 100
  double risk_pct = 0.0;    // sqrt(12) * sample stdev * 100
  std::optional<double> r_over_r;  // empty when risk is zero
  std::size_t months = 0;
};

StrategySummary summarize_strategy(const std::vector<LsMonthReturn>& series);

}  // namespace xs
