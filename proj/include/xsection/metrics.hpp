#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xsection/month.hpp"

namespace xs {

using ScoreMap = std::map<std::string, double>;

// Spearman rank correlation over the common keys. Throws TooFewStocks (< 3
// common keys) or ZeroVariance (either side fully tied).
double spearman(const ScoreMap& scores, const ScoreMap& returns);

enum class Bucket { Tertile = 3, Quintile = 5 };

const char* to_string(Bucket b);

struct TopBottom {
  std::vector<std::string> top;     // k highest scores
  std::vector<std::string> bottom;  // k lowest scores
  bool degenerate = false;          // boundary scores tie across the two buckets
};

// k = round(n / 3) or round(n / 5). Stocks are ordered by (score, stock_id)
// ascending; the first k form the bottom bucket and the last k the top.
TopBottom bucket_top_bottom(const ScoreMap& scores, Bucket bucket);

// Mean of the two central order statistics for even counts.
double median(std::vector<double> values);

struct DirectionResult {
  std::size_t hits = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

// Top-bucket stocks above and bottom-bucket stocks below the median return of
// the scored universe count as hits; returns equal to the median are misses.
DirectionResult direction(const ScoreMap& scores, const ScoreMap& returns, Bucket bucket);

// P[X >= hits] for X ~ Binomial(total, 1/2). Exact up to total = 10^4, normal
// approximation with continuity correction above.
double binom_test_one_sided(std::size_t hits, std::size_t total);

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05, else "".
std::string significance_stars(double p_value);

struct DirectionEval {
  std::size_t hits = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double p_value = 1.0;
  std::size_t top_size = 0;
  std::size_t bottom_size = 0;
};

struct MonthlyEval {
  MonthId month;
  std::optional<double> corr;  // empty when undefined (all scores tied)
  DirectionEval tertile;
  DirectionEval quintile;
  double mse = 0.0;  // scores vs rank-scaled realized returns
  std::size_t universe_size = 0;
};

// Scores and realized returns are matched on their common stocks.
MonthlyEval evaluate_month(MonthId month, const ScoreMap& scores, const ScoreMap& returns);

struct DirectionSummary {
  std::size_t hits = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double p_value = 1.0;
  std::string stars;
};

struct SummaryRow {
  std::size_t months = 0;
  double corr = 0.0;  // mean over months with a defined correlation
  std::size_t corr_months = 0;
  DirectionSummary tertile;
  DirectionSummary quintile;
  double mse = 0.0;
};

SummaryRow aggregate_monthly(const std::vector<MonthlyEval>& evals);

}  // namespace xs
