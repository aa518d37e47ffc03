#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xsection/error.hpp"
#include "xsection/preprocess.hpp"

using namespace xs;
using xs::testing::record;

namespace {

// Panel of `months` months where every stock has every factor.
FactorPanel lagged_panel(int stocks, int months) { return xs::testing::random_panel(stocks, months, 11); }

}  // namespace

TEST_CASE("rank_scale examples") {
  auto a = rank_scale({{"A", 3.2}, {"B", 1.1}, {"C", 5.0}});
  CHECK(a.at("A") == 2.0 / 3.0);
  CHECK(a.at("B") == 1.0 / 3.0);
  CHECK(a.at("C") == 1.0);
  CHECK(rank_scale({{"A", 7.0}}).at("A") == 1.0);
  auto t = rank_scale({{"A", 1.0}, {"B", 1.0}, {"C", 2.0}});
  CHECK(t.at("A") == 0.5);
  CHECK(t.at("B") == 0.5);
  CHECK(t.at("C") == 1.0);
  CHECK_THROWS_AS(rank_scale({}), Error);
  CHECK_THROWS_AS(rank_scale({{"A", NAN}}), Error);
}

TEST_CASE("rank_scale is invariant under increasing transforms") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int rep = 0; rep < 50; ++rep) {
    std::map<std::string, double> raw, mapped;
    for (int i = 0; i < 40; ++i) {
      double v = std::round(u(rng) * 4) / 4;  // include ties
      raw["S" + std::to_string(i)] = v;
      mapped["S" + std::to_string(i)] = std::exp(v) * 7.0 + 1.0;
    }
    const auto a = rank_scale(raw);
    const auto b = rank_scale(mapped);
    CHECK(a == b);
    for (const auto& [k, v] : a) CHECK((v > 0.0 && v <= 1.0));
  }
}

TEST_CASE("scale_month per factor with missing values") {
  const MonthId m{2001, 11};
  auto a = record("A", m, 1), b = record("B", m, 2), c = record("C", m, 3), d = record("D", m, 4);
  b.missing[4] = true;
  for (auto* r : {&a, &b, &c, &d}) r->factors[9] = 5.0;  // constant column
  const auto panel = FactorPanel::from_records({a, b, c, d});
  const auto s = scale_month(panel, m);
  auto f0 = s.factor_map(0);
  CHECK(f0.at("A") == 0.25);
  CHECK(f0.at("D") == 1.0);
  auto f4 = s.factor_map(4);
  CHECK(f4.size() == 3);
  CHECK(f4.count("B") == 0);
  CHECK(f4.at("C") == 2.0 / 3.0);
  for (const auto& [id, v] : s.factor_map(9)) CHECK(v == 0.625);
  CHECK_THROWS_AS(scale_month(panel, m.plus_months(1)), Error);
}

TEST_CASE("feature vectors use lag-major layout") {
  const auto panel = lagged_panel(5, 13);
  const auto cache = ScaledCache::build(panel);
  const MonthId t = panel.last_month();
  const auto fv = build_features(cache, "S1002", t);
  REQUIRE(fv.has_value());
  CHECK(fv->values.size() == 125);
  for (std::size_t l = 0; l < kLagMonths.size(); ++l) {
    const auto* sec = cache.find(t.minus_months(kLagMonths[l]));
    for (std::size_t j = 0; j < kFactorCount; ++j) {
      CHECK(fv->values[l * kFactorCount + j] == *sec->value(j, "S1002"));
    }
  }
  for (double v : fv->values) CHECK((v > 0.0 && v <= 1.0));
  CHECK_THROWS_AS(build_features(cache, "S1002", t.minus_months(1)), Error);  // lag 12 outside cache
}

TEST_CASE("ineligible stocks") {
  auto base = lagged_panel(4, 13);
  std::vector<FactorRecord> recs;
  for (const auto& r : base.records()) {
    if (r.stock_id == "S1000" && r.month == base.first_month()) continue;  // absent at T-12
    auto copy = r;
    if (copy.stock_id == "S1001" && copy.month == base.last_month().minus_months(6)) copy.missing[3] = true;
    recs.push_back(copy);
  }
  const auto panel = FactorPanel::from_records(recs);
  const auto cache = ScaledCache::build(panel);
  const MonthId t = panel.last_month();
  CHECK_FALSE(build_features(cache, "S1000", t).has_value());
  CHECK_FALSE(build_features(cache, "S1001", t).has_value());
  CHECK(build_features(cache, "S1002", t).has_value());
  const auto batch = eligible_features(panel, cache, t);
  CHECK(batch.stock_ids == std::vector<std::string>{"S1002", "S1003"});
}

TEST_CASE("training set sizes") {
  const auto panel = lagged_panel(3, 14);
  const MonthId first = panel.first_month();
  SUBCASE("N=1 with 3 eligible stocks") {
    const auto ts = assemble_training_set(panel, first.plus_months(13), 1);
    CHECK(ts.size() == 3);
    CHECK(ts.months.size() == 1);
    CHECK(ts.months[0].anchor == first.plus_months(12));
  }
  SUBCASE("N=2 with 3 and 4 eligible stocks") {
    std::vector<FactorRecord> recs;
    for (const auto& r : lagged_panel(4, 15).records()) {
      // S1003 misses the first month, so it lacks the 12-month lag of the earlier anchor
      if (r.stock_id == "S1003" && r.month == first) continue;
      recs.push_back(r);
    }
    const auto p = FactorPanel::from_records(recs);
    const auto ts = assemble_training_set(p, first.plus_months(14), 2);
    CHECK(ts.size() == 7);
    CHECK(ts.months[0].count == 3);
    CHECK(ts.months[1].count == 4);
  }
  SUBCASE("window earlier than panel start plus lags") {
    try {
      assemble_training_set(panel, first.plus_months(12), 1);
      FAIL("expected InsufficientHistory");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InsufficientHistory);
    }
  }
}

TEST_CASE("targets are rank-scaled returns of each month") {
  const auto panel = lagged_panel(20, 16);
  const auto ts = assemble_training_set(panel, panel.last_month(), 3);
  for (const auto& block : ts.months) {
    std::map<std::string, double> raw;
    for (std::size_t i = block.begin; i < block.begin + block.count; ++i) {
      raw[ts.stock_ids[i]] = *panel.find(block.anchor, ts.stock_ids[i])->fwd_return;
    }
    const auto expected = rank_scale(raw);
    for (std::size_t i = block.begin; i < block.begin + block.count; ++i) {
      CHECK(ts.targets(static_cast<Eigen::Index>(i)) == expected.at(ts.stock_ids[i]));
      CHECK(ts.anchors[i] == block.anchor);
    }
  }
  CHECK(ts.features.minCoeff() > 0.0);
  CHECK(ts.features.maxCoeff() <= 1.0);
}

TEST_CASE("training set reads no feature month after its anchor") {
  const auto panel = lagged_panel(10, 20);
  const auto cache = ScaledCache::build(panel);
  AccessTrace trace;
  const MonthId fit = panel.last_month();
  assemble_training_set(panel, cache, fit, 5, &trace);
  std::size_t targets = 0;
  for (const auto& r : trace.reads()) {
    if (r.kind == AccessTrace::Kind::Feature) {
      CHECK(r.month <= r.anchor);
    } else {
      ++targets;
      CHECK(r.month == r.anchor.plus_months(1));
      CHECK(r.month <= fit);
    }
    CHECK(r.anchor < fit);
  }
  CHECK(targets == 50);
}
