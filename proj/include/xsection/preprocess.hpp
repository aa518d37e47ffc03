#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xsection/month.hpp"
#include "xsection/panel.hpp"

namespace xs {

// Feature lags in months, lag-major block order of the feature vector.
inline constexpr std::array<int, 5> kLagMonths{0, 3, 6, 9, 12};
inline constexpr std::size_t kFeatureDim = kLagMonths.size() * kFactorCount;  // 125
inline constexpr int kMaxLag = 12;

// 1-based ranks with ties sharing the mean of their ordinal positions.
std::vector<double> average_ranks(std::span<const double> values);

// Ascending average rank divided by the count. Non-finite inputs are dropped.
std::map<std::string, double> rank_scale(const std::map<std::string, double>& values);

struct ScaledCrossSection {
  MonthId month;
  std::vector<std::string> stocks;                          // sorted
  std::vector<std::array<double, kFactorCount>> values;     // NaN where the factor is absent

  const std::array<double, kFactorCount>* row(std::string_view stock_id) const;
  std::optional<double> value(std::size_t factor, std::string_view stock_id) const;
  std::map<std::string, double> factor_map(std::size_t factor) const;
};

ScaledCrossSection scale_month(const FactorPanel& panel, MonthId m);

// Records which panel months feed each example; used to audit look-ahead.
class AccessTrace {
 public:
  enum class Kind { Feature, Target };
  struct Read {
    Kind kind;
    MonthId anchor;  // feature month of the example
    MonthId month;   // month read (Feature) or month the return is realized (Target)
    MonthId context; // prediction month the read serves, as set by the caller
  };

  void set_context(MonthId prediction_month);
  void record(Kind kind, MonthId anchor, MonthId month);
  std::vector<Read> reads() const;

 private:
  mutable std::mutex mutex_;
  MonthId context_;
  std::vector<Read> reads_;
};

class ScaledCache {
 public:
  ScaledCache() = default;
  static ScaledCache build(const FactorPanel& panel);
  static ScaledCache build(const FactorPanel& panel, MonthId first, MonthId last);

  void insert(ScaledCrossSection section);
  const ScaledCrossSection* find(MonthId m) const;

 private:
  std::map<int, ScaledCrossSection> sections_;
};

struct FeatureVector {
  std::string stock_id;
  MonthId anchor;
  std::array<double, kFeatureDim> values{};
};

// nullopt means the stock is ineligible (absent or missing a factor at some lag).
// Throws MissingScaledMonth if the cache lacks one of the lag months.
std::optional<FeatureVector> build_features(const ScaledCache& cache, std::string_view stock_id,
                                            MonthId anchor, AccessTrace* trace = nullptr);

struct TargetScore {
  std::string stock_id;
  MonthId month;  // realization month
  double score = 0.0;
};

struct MonthBlock {
  MonthId anchor;
  std::size_t begin = 0;
  std::size_t count = 0;
};

struct TrainingSet {
  Eigen::MatrixXd features;  // K x 125
  Eigen::VectorXd targets;   // K, rank-scaled returns
  std::vector<std::string> stock_ids;
  std::vector<MonthId> anchors;
  std::vector<MonthBlock> months;  // one contiguous block per window month
  MonthId fit_month;               // T + 1
  int window = 0;                  // N

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

// Examples anchored at t in [fit_month - window, fit_month - 1]; each target is
// the return over t -> t + 1, rank-scaled across that month's eligible stocks.
TrainingSet assemble_training_set(const FactorPanel& panel, const ScaledCache& cache, MonthId fit_month,
                                  int window, AccessTrace* trace = nullptr);
TrainingSet assemble_training_set(const FactorPanel& panel, MonthId fit_month, int window);

struct FeatureBatch {
  MonthId anchor;
  std::vector<std::string> stock_ids;
  Eigen::MatrixXd features;  // n x 125
};

// Every feature-eligible member of the universe at `anchor`.
FeatureBatch eligible_features(const FactorPanel& panel, const ScaledCache& cache, MonthId anchor,
                               AccessTrace* trace = nullptr);

}  // namespace xs
