#include "xsection/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "xsection/error.hpp"
#include "xsection/preprocess.hpp"

namespace xs {

namespace {

struct Matched {
  std::vector<const std::string*> ids;
  std::vector<double> scores;
  std::vector<double> returns;
};

Matched match(const ScoreMap& scores, const ScoreMap& returns) {
  Matched m;
  auto a = scores.begin();
  auto b = returns.begin();
  while (a != scores.end() && b != returns.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      m.ids.push_back(&a->first);
      m.scores.push_back(a->second);
      m.returns.push_back(b->second);
      ++a;
      ++b;
    }
  }
  return m;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "rank correlation undefined for a fully tied vector");
  return sxy / std::sqrt(sxx * syy);
}

std::size_t bucket_size(std::size_t n, Bucket bucket) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(n) / static_cast<double>(static_cast<int>(bucket))));
}

}  // namespace

double spearman(const ScoreMap& scores, const ScoreMap& returns) {
  const auto m = match(scores, returns);
  if (m.ids.size() < 3) {
    throw Error(ErrorKind::TooFewStocks, std::to_string(m.ids.size()) + " common stocks, need at least 3");
  }
  return pearson(average_ranks(m.scores), average_ranks(m.returns));
}

const char* to_string(Bucket b) { return b == Bucket::Tertile ? "tertile" : "quintile"; }

TopBottom bucket_top_bottom(const ScoreMap& scores, Bucket bucket) {
  const std::size_t n = scores.size();
  const std::size_t min_n = static_cast<std::size_t>(static_cast<int>(bucket));
  if (n < min_n) {
    throw Error(ErrorKind::UniverseTooSmall,
                std::to_string(n) + " stocks, " + to_string(bucket) + " needs at least " + std::to_string(min_n));
  }
  std::vector<std::pair<double, const std::string*>> order;
  order.reserve(n);
  for (const auto& [id, s] : scores) order.emplace_back(s, &id);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::size_t k = bucket_size(n, bucket);
  TopBottom out;
  for (std::size_t i = 0; i < k; ++i) out.bottom.push_back(*order[i].second);
  for (std::size_t i = n - k; i < n; ++i) out.top.push_back(*order[i].second);
  out.degenerate = order[k - 1].first == order[n - k].first;
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyData, "median of empty set");
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DirectionResult direction(const ScoreMap& scores, const ScoreMap& returns, Bucket bucket) {
  const auto m = match(scores, returns);
  ScoreMap common_scores;
  ScoreMap common_returns;
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    common_scores.emplace(*m.ids[i], m.scores[i]);
    common_returns.emplace(*m.ids[i], m.returns[i]);
  }
  const auto buckets = bucket_top_bottom(common_scores, bucket);
  const double med = median(m.returns);
  DirectionResult r;
  for (const auto& id : buckets.top) r.hits += common_returns.at(id) > med ? 1 : 0;
  for (const auto& id : buckets.bottom) r.hits += common_returns.at(id) < med ? 1 : 0;
  r.total = buckets.top.size() + buckets.bottom.size();
  r.fraction = static_cast<double>(r.hits) / static_cast<double>(r.total);
  return r;
}

double binom_test_one_sided(std::size_t hits, std::size_t total) {
  if (total == 0) throw Error(ErrorKind::EmptyData, "binomial test needs total >= 1");
  if (hits == 0) return 1.0;
  if (hits > total) return 0.0;
  if (total <= 62) {
    // integer binomial coefficients are exact here
    std::uint64_t c = 1;  // C(total, k)
    std::uint64_t tail = 0;
    for (std::size_t k = 0; k <= total; ++k) {
      if (k >= hits) tail += c;
      c = c / (k + 1) * (total - k) + c % (k + 1) * (total - k) / (k + 1);
    }
    return std::ldexp(static_cast<double>(tail), -static_cast<int>(total));
  }
  const double n = static_cast<double>(total);
  if (total <= 10000) {
    const double log_half_n = n * std::log(0.5);
    const double log_n1 = std::lgamma(n + 1.0);
    double max_log = -INFINITY;
    std::vector<double> logs;
    logs.reserve(total - hits + 1);
    for (std::size_t k = hits; k <= total; ++k) {
      const double kk = static_cast<double>(k);
      const double l = log_n1 - std::lgamma(kk + 1.0) - std::lgamma(n - kk + 1.0) + log_half_n;
      logs.push_back(l);
      max_log = std::max(max_log, l);
    }
    double sum = 0.0;
    for (double l : logs) sum += std::exp(l - max_log);
    return std::min(1.0, std::exp(max_log) * sum);
  }
  const double z = (static_cast<double>(hits) - 0.5 - 0.5 * n) / std::sqrt(0.25 * n);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

std::string significance_stars(double p_value) {
  if (p_value < 0.001) return "***";
  if (p_value < 0.01) return "**";
  if (p_value < 0.05) return "*";
  return "";
}

MonthlyEval evaluate_month(MonthId month, const ScoreMap& scores, const ScoreMap& returns) {
  const auto m = match(scores, returns);
  MonthlyEval ev;
  ev.month = month;
  ev.universe_size = m.ids.size();
  ScoreMap common_scores;
  ScoreMap common_returns;
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    common_scores.emplace(*m.ids[i], m.scores[i]);
    common_returns.emplace(*m.ids[i], m.returns[i]);
  }
  try {
    ev.corr = spearman(common_scores, common_returns);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVariance) throw;
  }
  for (Bucket b : {Bucket::Tertile, Bucket::Quintile}) {
    const auto d = direction(common_scores, common_returns, b);
    auto& out = b == Bucket::Tertile ? ev.tertile : ev.quintile;
    out.hits = d.hits;
    out.total = d.total;
    out.fraction = d.fraction;
    out.p_value = binom_test_one_sided(d.hits, d.total);
    out.top_size = d.total / 2;
    out.bottom_size = d.total / 2;
  }
  const auto ranks = average_ranks(m.returns);
  const double n = static_cast<double>(m.returns.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const double diff = m.scores[i] - ranks[i] / n;
    sq += diff * diff;
  }
  ev.mse = sq / n;
  return ev;
}

SummaryRow aggregate_monthly(const std::vector<MonthlyEval>& evals) {
  if (evals.empty()) throw Error(ErrorKind::EmptyEvalList, "no monthly evaluations to aggregate");
  SummaryRow row;
  row.months = evals.size();
  double corr_sum = 0.0;
  double mse_sum = 0.0;
  for (const auto& e : evals) {
    if (e.corr) {
      corr_sum += *e.corr;
      ++row.corr_months;
    }
    mse_sum += e.mse;
    row.tertile.hits += e.tertile.hits;
    row.tertile.total += e.tertile.total;
    row.quintile.hits += e.quintile.hits;
    row.quintile.total += e.quintile.total;
  }
  row.corr = row.corr_months > 0 ? corr_sum / static_cast<double>(row.corr_months) : 0.0;
  row.mse = mse_sum / static_cast<double>(evals.size());
  for (auto* d : {&row.tertile, &row.quintile}) {
    d->fraction = static_cast<double>(d->hits) / static_cast<double>(d->total);
    d->p_value = binom_test_one_sided(d->hits, d->total);
    d->stars = significance_stars(d->p_value);
  }
  return row;
}

}  // namespace xs
