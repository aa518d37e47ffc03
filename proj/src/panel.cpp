#include "xsection/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs {

bool FactorRecord::complete() const {
  return std::none_of(missing.begin(), missing.end(), [](bool b) { return b; });
}

FactorPanel FactorPanel::from_records(std::vector<FactorRecord> records) {
  if (records.empty()) throw Error(ErrorKind::EmptyPanel, "panel has no records");
  std::sort(records.begin(), records.end(), [](const FactorRecord& a, const FactorRecord& b) {
    if (a.month != b.month) return a.month < b.month;
    return a.stock_id < b.stock_id;
  });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].month == records[i - 1].month && records[i].stock_id == records[i - 1].stock_id) {
      throw Error(ErrorKind::DuplicateKey,
                  "(" + records[i].month.to_string() + ", " + records[i].stock_id + ")");
    }
  }
  for (auto& r : records) {
    for (std::size_t j = 0; j < kFactorCount; ++j) {
      if (!std::isfinite(r.factors[j])) r.missing[j] = true;
      if (r.missing[j]) r.factors[j] = 0.0;
    }
    if (r.fwd_return && !std::isfinite(*r.fwd_return)) r.fwd_return.reset();
  }

  FactorPanel panel;
  panel.first_ = records.front().month;
  panel.last_ = records.back().month;
  const int n_months = months_between(panel.first_, panel.last_) + 1;
  panel.offsets_.assign(static_cast<std::size_t>(n_months) + 1, 0);
  std::size_t pos = 0;
  for (int k = 0; k < n_months; ++k) {
    panel.offsets_[k] = pos;
    const MonthId m = panel.first_.plus_months(k);
    while (pos < records.size() && records[pos].month == m) ++pos;
  }
  panel.offsets_[n_months] = pos;
  panel.records_ = std::move(records);
  return panel;
}

std::span<const FactorRecord> FactorPanel::records_at(MonthId m) const {
  if (!contains(m)) return {};
  const auto k = static_cast<std::size_t>(months_between(first_, m));
  return std::span<const FactorRecord>(records_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
}

const FactorRecord* FactorPanel::find(MonthId m, std::string_view stock_id) const {
  auto rows = records_at(m);
  auto it = std::lower_bound(rows.begin(), rows.end(), stock_id,
                             [](const FactorRecord& r, std::string_view id) { return r.stock_id < id; });
  if (it == rows.end() || it->stock_id != stock_id) return nullptr;
  return &*it;
}

std::vector<std::string> universe_at(const FactorPanel& panel, MonthId m) {
  if (!panel.contains(m)) {
    throw Error(ErrorKind::MonthOutOfRange,
                m.to_string() + " outside " + panel.first_month().to_string() + ".." +
                    panel.last_month().to_string());
  }
  std::vector<std::string> ids;
  for (const auto& r : panel.records_at(m)) ids.push_back(r.stock_id);
  return ids;
}

std::string panel_csv_header() {
  std::string h = "month,stock_id";
  for (std::size_t j = 1; j <= kFactorCount; ++j) {
    h += j < 10 ? ",f0" : ",f";
    h += std::to_string(j);
  }
  h += ",fwd_return";
  return h;
}

FactorPanel read_panel(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedHeader, "missing header line");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != panel_csv_header()) {
    throw Error(ErrorKind::MalformedHeader, "expected '" + panel_csv_header() + "'");
  }

  constexpr std::size_t kFields = kFactorCount + 3;
  std::vector<FactorRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != kFields) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(kFields) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    FactorRecord r;
    r.month = MonthId::parse(fields[0]);
    r.stock_id = std::string(fields[1]);
    if (r.stock_id.empty()) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": empty stock_id");
    for (std::size_t j = 0; j < kFactorCount; ++j) {
      auto v = parse_double(fields[2 + j]);
      if (v && std::isfinite(*v)) {
        r.factors[j] = *v;
      } else {
        r.missing[j] = true;
      }
    }
    r.fwd_return = parse_double(fields[kFields - 1]);
    records.push_back(std::move(r));
  }
  return FactorPanel::from_records(std::move(records));
}

FactorPanel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open panel '" + path + "'");
  return read_panel(in);
}

void write_panel(const FactorPanel& panel, std::ostream& out) {
  out << panel_csv_header() << '\n';
  std::string row;
  for (const auto& r : panel.records()) {
    row = r.month.to_string();
    row += ',';
    row += r.stock_id;
    for (std::size_t j = 0; j < kFactorCount; ++j) {
      row += ',';
      if (!r.missing[j]) row += format_double(r.factors[j]);
    }
    row += ',';
    if (r.fwd_return) row += format_double(*r.fwd_return);
    out << row << '\n';
  }
}

void save_panel(const FactorPanel& panel, const std::string& path) {
  std::ostringstream ss;
  write_panel(panel, ss);
  write_file(path, ss.str());
}

ValidationReport validate_panel(const FactorPanel& panel, std::size_t universe_floor) {
  ValidationReport report;
  report.universe_floor = universe_floor;
  std::array<std::size_t, kFactorCount> missing_counts{};
  for (int k = 0; k < panel.month_count(); ++k) {
    const MonthId m = panel.first_month().plus_months(k);
    auto rows = panel.records_at(m);
    report.universe_sizes.push_back({m, rows.size()});
    if (rows.size() < universe_floor) {
      report.small_universe_months.push_back(m);
      report.warnings.push_back(m.to_string() + ": universe size " + std::to_string(rows.size()) +
                                " below floor " + std::to_string(universe_floor));
    }
    bool missing_return = false;
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < kFactorCount; ++j) missing_counts[j] += r.missing[j] ? 1 : 0;
      if (!r.fwd_return) missing_return = true;
    }
    if (missing_return && m < panel.last_month()) {
      report.months_missing_returns.push_back(m);
      report.warnings.push_back(m.to_string() + ": records without fwd_return");
    }
  }
  for (std::size_t j = 0; j < kFactorCount; ++j) {
    report.missing_rate[j] = static_cast<double>(missing_counts[j]) / static_cast<double>(panel.size());
  }
  return report;
}

}  // namespace xs
