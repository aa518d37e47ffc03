#include "xsection/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xsection/error.hpp"

namespace xs {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // ordinal ranks i+1 .. j share their mean
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

std::map<std::string, double> rank_scale(const std::map<std::string, double>& values) {
  std::vector<const std::string*> keys;
  std::vector<double> finite;
  for (const auto& [id, v] : values) {
    if (!std::isfinite(v)) continue;
    keys.push_back(&id);
    finite.push_back(v);
  }
  if (finite.empty()) throw Error(ErrorKind::EmptyCrossSection, "no finite values to rank");
  const auto ranks = average_ranks(finite);
  const double n = static_cast<double>(finite.size());
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < keys.size(); ++i) out.emplace(*keys[i], ranks[i] / n);
  return out;
}

const std::array<double, kFactorCount>* ScaledCrossSection::row(std::string_view stock_id) const {
  auto it = std::lower_bound(stocks.begin(), stocks.end(), stock_id);
  if (it == stocks.end() || *it != stock_id) return nullptr;
  return &values[static_cast<std::size_t>(it - stocks.begin())];
}

std::optional<double> ScaledCrossSection::value(std::size_t factor, std::string_view stock_id) const {
  const auto* r = row(stock_id);
  if (!r || std::isnan((*r)[factor])) return std::nullopt;
  return (*r)[factor];
}

std::map<std::string, double> ScaledCrossSection::factor_map(std::size_t factor) const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < stocks.size(); ++i) {
    if (!std::isnan(values[i][factor])) out.emplace(stocks[i], values[i][factor]);
  }
  return out;
}

ScaledCrossSection scale_month(const FactorPanel& panel, MonthId m) {
  if (!panel.contains(m)) throw Error(ErrorKind::MonthOutOfRange, m.to_string());
  auto rows = panel.records_at(m);
  ScaledCrossSection out;
  out.month = m;
  out.stocks.reserve(rows.size());
  for (const auto& r : rows) out.stocks.push_back(r.stock_id);
  out.values.assign(rows.size(), {});
  for (auto& v : out.values) v.fill(std::numeric_limits<double>::quiet_NaN());

  std::vector<double> column;
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < kFactorCount; ++j) {
    column.clear();
    members.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].missing[j]) continue;
      column.push_back(rows[i].factors[j]);
      members.push_back(i);
    }
    if (column.empty()) continue;
    const auto ranks = average_ranks(column);
    const double n = static_cast<double>(column.size());
    for (std::size_t k = 0; k < members.size(); ++k) out.values[members[k]][j] = ranks[k] / n;
  }
  return out;
}

void AccessTrace::set_context(MonthId prediction_month) {
  std::lock_guard lock(mutex_);
  context_ = prediction_month;
}

void AccessTrace::record(Kind kind, MonthId anchor, MonthId month) {
  std::lock_guard lock(mutex_);
  reads_.push_back({kind, anchor, month, context_});
}

std::vector<AccessTrace::Read> AccessTrace::reads() const {
  std::lock_guard lock(mutex_);
  return reads_;
}

ScaledCache ScaledCache::build(const FactorPanel& panel) {
  return build(panel, panel.first_month(), panel.last_month());
}

ScaledCache ScaledCache::build(const FactorPanel& panel, MonthId first, MonthId last) {
  ScaledCache cache;
  for (MonthId m = std::max(first, panel.first_month()); m <= std::min(last, panel.last_month());
       m = m.plus_months(1)) {
    cache.insert(scale_month(panel, m));
  }
  return cache;
}

void ScaledCache::insert(ScaledCrossSection section) {
  const int key = section.month.index();
  sections_.insert_or_assign(key, std::move(section));
}

const ScaledCrossSection* ScaledCache::find(MonthId m) const {
  auto it = sections_.find(m.index());
  return it == sections_.end() ? nullptr : &it->second;
}

std::optional<FeatureVector> build_features(const ScaledCache& cache, std::string_view stock_id, MonthId anchor,
                                            AccessTrace* trace) {
  std::array<const ScaledCrossSection*, kLagMonths.size()> sections{};
  for (std::size_t l = 0; l < kLagMonths.size(); ++l) {
    const MonthId m = anchor.minus_months(kLagMonths[l]);
    sections[l] = cache.find(m);
    if (!sections[l]) throw Error(ErrorKind::MissingScaledMonth, m.to_string());
  }
  FeatureVector fv;
  fv.stock_id = std::string(stock_id);
  fv.anchor = anchor;
  for (std::size_t l = 0; l < sections.size(); ++l) {
    if (trace) trace->record(AccessTrace::Kind::Feature, anchor, sections[l]->month);
    const auto* row = sections[l]->row(stock_id);
    if (!row) return std::nullopt;
    for (std::size_t j = 0; j < kFactorCount; ++j) {
      const double v = (*row)[j];
      if (std::isnan(v)) return std::nullopt;
      fv.values[l * kFactorCount + j] = v;
    }
  }
  return fv;
}

TrainingSet assemble_training_set(const FactorPanel& panel, const ScaledCache& cache, MonthId fit_month, int window,
                                  AccessTrace* trace) {
  if (window < 1) throw Error(ErrorKind::InvalidConfig, "training window must be >= 1 month");
  const MonthId last_anchor = fit_month.minus_months(1);
  const MonthId first_anchor = fit_month.minus_months(window);
  if (first_anchor.minus_months(kMaxLag) < panel.first_month() || last_anchor > panel.last_month()) {
    throw Error(ErrorKind::InsufficientHistory,
                "window " + first_anchor.to_string() + ".." + last_anchor.to_string() + " needs panel from " +
                    first_anchor.minus_months(kMaxLag).to_string() + ", panel covers " +
                    panel.first_month().to_string() + ".." + panel.last_month().to_string());
  }

  std::vector<FeatureVector> feats;
  std::vector<double> targets;
  std::vector<MonthBlock> blocks;
  std::vector<double> returns;
  for (MonthId t = first_anchor; t <= last_anchor; t = t.plus_months(1)) {
    MonthBlock block{t, feats.size(), 0};
    returns.clear();
    for (const auto& rec : panel.records_at(t)) {
      if (!rec.fwd_return) continue;
      auto fv = build_features(cache, rec.stock_id, t, trace);
      if (!fv) continue;
      if (trace) trace->record(AccessTrace::Kind::Target, t, t.plus_months(1));
      feats.push_back(std::move(*fv));
      returns.push_back(*rec.fwd_return);
    }
    block.count = returns.size();
    if (!returns.empty()) {
      const auto ranks = average_ranks(returns);
      const double n = static_cast<double>(returns.size());
      for (double r : ranks) targets.push_back(r / n);
    }
    blocks.push_back(block);
  }

  TrainingSet ts;
  ts.fit_month = fit_month;
  ts.window = window;
  ts.months = std::move(blocks);
  const auto k = static_cast<Eigen::Index>(feats.size());
  ts.features.resize(k, static_cast<Eigen::Index>(kFeatureDim));
  ts.targets.resize(k);
  ts.stock_ids.reserve(feats.size());
  ts.anchors.reserve(feats.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& fv = feats[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < kFeatureDim; ++c) ts.features(i, static_cast<Eigen::Index>(c)) = fv.values[c];
    ts.targets(i) = targets[static_cast<std::size_t>(i)];
    ts.stock_ids.push_back(fv.stock_id);
    ts.anchors.push_back(fv.anchor);
  }
  return ts;
}

TrainingSet assemble_training_set(const FactorPanel& panel, MonthId fit_month, int window) {
  const MonthId first = fit_month.minus_months(window + kMaxLag);
  auto cache = ScaledCache::build(panel, first, fit_month.minus_months(1));
  return assemble_training_set(panel, cache, fit_month, window);
}

FeatureBatch eligible_features(const FactorPanel& panel, const ScaledCache& cache, MonthId anchor,
                               AccessTrace* trace) {
  if (!panel.contains(anchor) || anchor.minus_months(kMaxLag) < panel.first_month()) {
    throw Error(ErrorKind::InsufficientHistory, "cannot build features anchored at " + anchor.to_string());
  }
  FeatureBatch batch;
  batch.anchor = anchor;
  std::vector<FeatureVector> feats;
  for (const auto& rec : panel.records_at(anchor)) {
    auto fv = build_features(cache, rec.stock_id, anchor, trace);
    if (fv) feats.push_back(std::move(*fv));
  }
  batch.features.resize(static_cast<Eigen::Index>(feats.size()), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    batch.stock_ids.push_back(feats[i].stock_id);
    for (std::size_t c = 0; c < kFeatureDim; ++c) {
      batch.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = feats[i].values[c];
    }
  }
  return batch;
}

}  // namespace xs
