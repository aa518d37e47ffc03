#pragma once

// Small builders shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xsection/panel.hpp"
#include "xsection/preprocess.hpp"

namespace xs::testing {

inline FactorRecord record(const std::string& id, MonthId m, double base, std::optional<double> ret = 0.0) {
  FactorRecord r;
  r.stock_id = id;
  r.month = m;
  for (std::size_t j = 0; j < kFactorCount; ++j) r.factors[j] = base + static_cast<double>(j);
  r.fwd_return = ret;
  return r;
}

// `stocks` stocks over `months` months from 2000-01; factor j of stock i at
// month k is a fixed pseudo-random value, returns are uniform noise.
inline FactorPanel random_panel(int stocks, int months, std::uint64_t seed, MonthId start = {2000, 1}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<FactorRecord> recs;
  for (int k = 0; k < months; ++k) {
    for (int i = 0; i < stocks; ++i) {
      FactorRecord r;
      r.stock_id = "S" + std::to_string(1000 + i);
      r.month = start.plus_months(k);
      for (auto& f : r.factors) f = u(rng);
      r.fwd_return = 0.05 * u(rng);
      recs.push_back(std::move(r));
    }
  }
  return FactorPanel::from_records(std::move(recs));
}

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  }
  return m;
}

inline Eigen::VectorXd uniform_vector(Eigen::Index n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return uniform_matrix(n, 1, rng, lo, hi).col(0);
}

// TrainingSet with `months` equal blocks of `per_month` rows.
inline TrainingSet blocked_set(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int months) {
  TrainingSet ts;
  ts.features = x;
  ts.targets = y;
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t per = n / static_cast<std::size_t>(months);
  for (int k = 0; k < months; ++k) {
    const std::size_t begin = per * static_cast<std::size_t>(k);
    const std::size_t count = k + 1 == months ? n - begin : per;
    ts.months.push_back({MonthId{2000, 1}.plus_months(k), begin, count});
  }
  for (std::size_t i = 0; i < n; ++i) {
    ts.stock_ids.push_back("S" + std::to_string(i));
    ts.anchors.push_back(MonthId{2000, 1});
  }
  ts.window = months;
  return ts;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("xsection_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const { return leaf.empty() ? path_.string() : (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace xs::testing
