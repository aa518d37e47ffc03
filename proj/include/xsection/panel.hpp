#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xsection/month.hpp"

namespace xs {

inline constexpr std::size_t kFactorCount = 25;

struct FactorRecord {
  std::string stock_id;
  MonthId month;
  std::array<double, kFactorCount> factors{};  // raw, unscaled
  std::array<bool, kFactorCount> missing{};
  // Total return over month -> month + 1, stored with the feature month.
  std::optional<double> fwd_return;

  bool has_factor(std::size_t j) const { return !missing[j]; }
  bool complete() const;
};

// Immutable monthly panel. Records are kept sorted by (month, stock_id).
class FactorPanel {
 public:
  // Validates uniqueness of (month, stock_id) and non-emptiness.
  static FactorPanel from_records(std::vector<FactorRecord> records);

  MonthId first_month() const { return first_; }
  MonthId last_month() const { return last_; }
  bool contains(MonthId m) const { return m >= first_ && m <= last_; }
  std::size_t size() const { return records_.size(); }
  int month_count() const { return months_between(first_, last_) + 1; }

  std::span<const FactorRecord> records() const { return records_; }
  // Records at m, sorted by stock_id; empty for months in range with no data.
  std::span<const FactorRecord> records_at(MonthId m) const;
  const FactorRecord* find(MonthId m, std::string_view stock_id) const;

 private:
  std::vector<FactorRecord> records_;
  std::vector<std::size_t> offsets_;  // month_count() + 1 entries
  MonthId first_;
  MonthId last_;
};

// Stocks with a record at m, sorted by id. Throws MonthOutOfRange.
std::vector<std::string> universe_at(const FactorPanel& panel, MonthId m);

// CSV header: month,stock_id,f01,...,f25,fwd_return
std::string panel_csv_header();
FactorPanel read_panel(std::istream& in);
FactorPanel load_panel(const std::string& path);
void write_panel(const FactorPanel& panel, std::ostream& out);
void save_panel(const FactorPanel& panel, const std::string& path);

struct MonthUniverse {
  MonthId month;
  std::size_t size = 0;
};

struct ValidationReport {
  std::vector<MonthUniverse> universe_sizes;
  std::array<double, kFactorCount> missing_rate{};
  std::size_t universe_floor = 30;
  std::vector<MonthId> small_universe_months;
  std::vector<MonthId> months_missing_returns;  // before the last month only
  std::vector<std::string> warnings;

  bool clean() const { return warnings.empty(); }
};

ValidationReport validate_panel(const FactorPanel& panel, std::size_t universe_floor = 30);

}  // namespace xs
