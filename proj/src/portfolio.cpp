#include "xsection/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "xsection/error.hpp"

namespace xs {

LsMonthReturn ls_month(MonthId month, const ScoreMap& scores, const ScoreMap& returns, Bucket bucket) {
  ScoreMap common;
  for (const auto& [id, s] : scores) {
    if (returns.count(id)) common.emplace(id, s);
  }
  const auto buckets = bucket_top_bottom(common, bucket);
  auto mean_return = [&](const std::vector<std::string>& ids) {
    double sum = 0.0;
    for (const auto& id : ids) sum += returns.at(id);
    return sum / static_cast<double>(ids.size());
  };
  LsMonthReturn out;
  out.month = month;
  out.long_return = mean_return(buckets.top);
  out.short_return = mean_return(buckets.bottom);
  out.ls_return = out.long_return - out.short_return;
  out.long_size = buckets.top.size();
  out.short_size = buckets.bottom.size();
  out.degenerate = buckets.degenerate;
  return out;
}

StrategySummary summarize_strategy(const std::vector<LsMonthReturn>& series) {
  if (series.size() < 2) throw Error(ErrorKind::TooFewMonths, "strategy summary needs at least 2 months");
  const double n = static_cast<double>(series.size());
  double sum = 0.0;
  double lo = series.front().ls_return;
  double hi = lo;
  for (const auto& m : series) {
    sum += m.ls_return;
    lo = std::min(lo, m.ls_return);
    hi = std::max(hi, m.ls_return);
  }
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& m : series) sq += (m.ls_return - mean) * (m.ls_return - mean);
  const double stdev = lo == hi ? 0.0 : std::sqrt(sq / (n - 1.0));

  StrategySummary s;
  s.months = series.size();
  s.return_pct = 12.0 * mean * 100.0;
  s.risk_pct = std::sqrt(12.0) * stdev * 100.0;
  if (s.risk_pct > 0.0) s.r_over_r = s.return_pct / s.risk_pct;
  return s;
}

}  // namespace xs
