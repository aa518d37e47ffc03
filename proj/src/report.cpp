#include "xsection/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs {

using nlohmann::json;

namespace {

StrategyCells cells(const std::optional<StrategySummary>& s) {
  if (!s) return {};
  return {s->return_pct, s->risk_pct, s->r_over_r};
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_number(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json cells_json(const StrategyCells& c) {
  return {{"return_pct", opt(c.return_pct)}, {"risk_pct", opt(c.risk_pct)}, {"r_over_r", opt(c.r_over_r)}};
}

StrategyCells cells_from(const json& j) {
  return {opt_number(j.at("return_pct")), opt_number(j.at("risk_pct")), opt_number(j.at("r_over_r"))};
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "-"; }

}  // namespace

ReportRow make_row(const ExperimentResult& result) {
  ReportRow row;
  row.name = result.name;
  if (!result.ok()) {
    row.error = result.error.empty() ? "failed" : result.error;
    return row;
  }
  const auto& r = *result.report;
  row.months = r.summary.months;
  row.corr = r.summary.corr;
  row.tertile_pct = 100.0 * r.summary.tertile.fraction;
  row.tertile_p = r.summary.tertile.p_value;
  row.tertile_stars = r.summary.tertile.stars;
  row.quintile_pct = 100.0 * r.summary.quintile.fraction;
  row.quintile_p = r.summary.quintile.p_value;
  row.quintile_stars = r.summary.quintile.stars;
  row.mse = r.summary.mse;
  row.tertile = cells(r.strategy_tertile);
  row.quintile = cells(r.strategy_quintile);
  for (std::size_t i = 0; i < r.monthly.size(); ++i) {
    const auto& m = r.monthly[i];
    row.monthly.push_back({m.month, m.corr, m.tertile.fraction, m.quintile.fraction, m.mse,
                           r.ls_tertile[i].ls_return, r.ls_quintile[i].ls_return});
  }
  return row;
}

RunReport make_report(const std::vector<ExperimentResult>& results) {
  RunReport report;
  for (const auto& r : results) report.rows.push_back(make_row(r));
  for (const auto& g : group_averages(results)) {
    report.groups.push_back({g.group + "_Avg", g.members, g.corr, 100.0 * g.tertile_fraction,
                             100.0 * g.quintile_fraction, g.mse});
  }
  return report;
}

json report_to_json(const RunReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row{{"name", r.name}};
    if (!r.ok()) {
      row["error"] = r.error;
      rows.push_back(std::move(row));
      continue;
    }
    row["months"] = r.months;
    row["corr"] = r.corr;
    row["direction_tertile"] = {{"pct", r.tertile_pct}, {"p_value", r.tertile_p}, {"stars", r.tertile_stars}};
    row["direction_quintile"] = {{"pct", r.quintile_pct}, {"p_value", r.quintile_p}, {"stars", r.quintile_stars}};
    row["mse"] = r.mse;
    row["strategy_tertile"] = cells_json(r.tertile);
    row["strategy_quintile"] = cells_json(r.quintile);
    json monthly = json::array();
    for (const auto& m : r.monthly) {
      monthly.push_back({{"month", m.month.to_string()},
                         {"corr", opt(m.corr)},
                         {"direction_tertile", m.tertile_direction},
                         {"direction_quintile", m.quintile_direction},
                         {"mse", m.mse},
                         {"ls_tertile", m.ls_tertile},
                         {"ls_quintile", m.ls_quintile}});
    }
    row["monthly"] = std::move(monthly);
    rows.push_back(std::move(row));
  }
  json groups = json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"name", g.name},
                      {"members", g.members},
                      {"corr", g.corr},
                      {"direction_tertile_pct", g.tertile_pct},
                      {"direction_quintile_pct", g.quintile_pct},
                      {"mse", g.mse}});
  }
  return {{"schema_version", report.schema_version}, {"rows", rows}, {"group_averages", groups}};
}

RunReport report_from_json(const json& doc) {
  try {
    RunReport report;
    report.schema_version = doc.at("schema_version").get<int>();
    if (report.schema_version != kReportSchemaVersion) {
      throw Error(ErrorKind::Parse, "unsupported report schema_version " + std::to_string(report.schema_version));
    }
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.name = j.at("name").get<std::string>();
      if (j.contains("error")) {
        r.error = j.at("error").get<std::string>();
        report.rows.push_back(std::move(r));
        continue;
      }
      r.months = j.at("months").get<std::size_t>();
      r.corr = j.at("corr").get<double>();
      const auto& t = j.at("direction_tertile");
      r.tertile_pct = t.at("pct").get<double>();
      r.tertile_p = t.at("p_value").get<double>();
      r.tertile_stars = t.at("stars").get<std::string>();
      const auto& q = j.at("direction_quintile");
      r.quintile_pct = q.at("pct").get<double>();
      r.quintile_p = q.at("p_value").get<double>();
      r.quintile_stars = q.at("stars").get<std::string>();
      r.mse = j.at("mse").get<double>();
      r.tertile = cells_from(j.at("strategy_tertile"));
      r.quintile = cells_from(j.at("strategy_quintile"));
      for (const auto& m : j.at("monthly")) {
        r.monthly.push_back({MonthId::parse(m.at("month").get<std::string>()), opt_number(m.at("corr")),
                             m.at("direction_tertile").get<double>(), m.at("direction_quintile").get<double>(),
                             m.at("mse").get<double>(), m.at("ls_tertile").get<double>(),
                             m.at("ls_quintile").get<double>()});
      }
      report.rows.push_back(std::move(r));
    }
    for (const auto& g : doc.at("group_averages")) {
      report.groups.push_back({g.at("name").get<std::string>(), g.at("members").get<std::vector<std::string>>(),
                               g.at("corr").get<double>(), g.at("direction_tertile_pct").get<double>(),
                               g.at("direction_quintile_pct").get<double>(), g.at("mse").get<double>()});
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const RunReport& report) {
  std::ostringstream out;
  out << "name,months,corr,direction_tertile_pct,tertile_p,tertile_stars,direction_quintile_pct,quintile_p,"
         "quintile_stars,mse,return_tertile_pct,risk_tertile_pct,rr_tertile,return_quintile_pct,"
         "risk_quintile_pct,rr_quintile,error\n";
  for (const auto& r : report.rows) {
    out << r.name << ',';
    if (!r.ok()) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << ",,,,,,,,,,,,,,," << msg << '\n';
      continue;
    }
    out << r.months << ',' << format_double(r.corr) << ',' << format_double(r.tertile_pct) << ','
        << format_double(r.tertile_p) << ',' << r.tertile_stars << ',' << format_double(r.quintile_pct) << ','
        << format_double(r.quintile_p) << ',' << r.quintile_stars << ',' << format_double(r.mse) << ','
        << cell(r.tertile.return_pct) << ',' << cell(r.tertile.risk_pct) << ',' << cell(r.tertile.r_over_r) << ','
        << cell(r.quintile.return_pct) << ',' << cell(r.quintile.risk_pct) << ',' << cell(r.quintile.r_over_r)
        << ",\n";
  }
  for (const auto& g : report.groups) {
    out << g.name << ",," << format_double(g.corr) << ',' << format_double(g.tertile_pct) << ",,,"
        << format_double(g.quintile_pct) << ",,," << format_double(g.mse) << ",,,,,,,\n";
  }
  return out.str();
}

std::string scores_csv(const ScoreSheet& sheet) {
  std::ostringstream out;
  out << "month,stock_id,score\n";
  for (const auto& [month, scores] : sheet) {
    const auto m = month.to_string();
    for (const auto& [id, score] : scores) out << m << ',' << id << ',' << format_double(score) << '\n';
  }
  return out.str();
}

std::string monthly_csv(const ReportRow& row) {
  std::ostringstream out;
  out << "month,corr,direction_tertile,direction_quintile,mse,ls_tertile,ls_quintile\n";
  for (const auto& m : row.monthly) {
    out << m.month.to_string() << ',' << cell(m.corr) << ',' << format_double(m.tertile_direction) << ','
        << format_double(m.quintile_direction) << ',' << format_double(m.mse) << ',' << format_double(m.ls_tertile)
        << ',' << format_double(m.ls_quintile) << '\n';
  }
  return out.str();
}

std::string render_table(const RunReport& report) {
  const std::vector<std::string> header{"Pattern",  "CORR",    "Dir3 %",   "Dir5 %",   "MSE",     "Ret3 %",
                                        "Risk3 %",  "R/R3",    "Ret5 %",   "Risk5 %",  "R/R5"};
  std::vector<std::vector<std::string>> lines{header};
  for (const auto& r : report.rows) {
    if (!r.ok()) {
      lines.push_back({r.name, "FAILED: " + r.error});
      continue;
    }
    lines.push_back({r.name, fixed(r.corr, 4), fixed(r.tertile_pct, 2) + r.tertile_stars,
                     fixed(r.quintile_pct, 2) + r.quintile_stars, fixed(r.mse, 5), fixed(r.tertile.return_pct, 2),
                     fixed(r.tertile.risk_pct, 2), fixed(r.tertile.r_over_r, 2), fixed(r.quintile.return_pct, 2),
                     fixed(r.quintile.risk_pct, 2), fixed(r.quintile.r_over_r, 2)});
  }
  for (const auto& g : report.groups) {
    lines.push_back({g.name, fixed(g.corr, 4), fixed(g.tertile_pct, 2), fixed(g.quintile_pct, 2), fixed(g.mse, 5)});
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& l : lines) {
    if (l.size() == 2 && l[1].rfind("FAILED", 0) == 0) {
      width[0] = std::max(width[0], l[0].size());
      continue;
    }
    for (std::size_t c = 0; c < l.size(); ++c) width[c] = std::max(width[c], l[c].size());
  }
  std::ostringstream out;
  for (const auto& l : lines) {
    std::string line;
    for (std::size_t c = 0; c < l.size(); ++c) {
      if (c == 0) {
        line += l[c] + std::string(width[0] - l[c].size(), ' ');
      } else if (l.size() == 2 && c == 1 && l[1].rfind("FAILED", 0) == 0) {
        line += "  " + l[c];
      } else {
        line += "  " + std::string(width[c] - l[c].size(), ' ') + l[c];
      }
    }
    out << line << '\n';
  }
  return out.str();
}

std::string cumulative_ls_csv(const RunReport& report) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows) {
    if (r.ok() && !r.monthly.empty()) rows.push_back(&r);
  }
  std::ostringstream out;
  out << "month";
  for (const auto* r : rows) out << ',' << r->name << "_tertile," << r->name << "_quintile";
  out << '\n';
  std::map<MonthId, std::vector<std::optional<std::pair<double, double>>>> grid;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& m : rows[k]->monthly) {
      auto& line = grid[m.month];
      line.resize(rows.size());
      line[k] = std::make_pair(m.ls_tertile, m.ls_quintile);
    }
  }
  std::vector<std::pair<double, double>> running(rows.size(), {0.0, 0.0});
  for (auto& [month, line] : grid) {
    line.resize(rows.size());
    out << month.to_string();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (line[k]) {
        running[k].first += line[k]->first;
        running[k].second += line[k]->second;
        out << ',' << format_double(running[k].first) << ',' << format_double(running[k].second);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace xs
