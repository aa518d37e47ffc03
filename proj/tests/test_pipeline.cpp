#include <doctest.h>

#include <set>

#include "support.hpp"
#include "xsection/error.hpp"
#include "xsection/pipeline.hpp"

using namespace xs;

namespace {

constexpr MonthId kStart{2000, 1};

ModelSpec small_net() {
  mlp::TrainConfig t;
  t.epochs = 2;
  return mlp_model("NN3_1", t);
}

ModelSpec small_forest() {
  forest::ForestHyper h;
  h.n_estimators = 5;
  h.max_features = 10;
  h.max_depth = 3;
  return forest_model(h);
}

ModelSpec small_svr() {
  svr::SvrHyper h;
  h.C = 1.0;
  h.gamma = 0.01;
  h.epsilon = 0.1;
  return svr_model(h);
}

// 20 stocks over 24 months; with N = 3 the first feasible prediction month is 2001-05.
const FactorPanel& panel() {
  static const FactorPanel p = xs::testing::random_panel(20, 24, 11, kStart);
  return p;
}

WalkForwardConfig schedule(ModelSpec model, MonthId start, MonthId end, int retrain = 1) {
  WalkForwardConfig c;
  c.train_window = 3;
  c.retrain_every = retrain;
  c.eval_start = start;
  c.eval_end = end;
  c.model = std::move(model);
  c.master_seed = 5;
  return c;
}

ScoreMap scores(std::initializer_list<std::pair<const std::string, double>> v) { return ScoreMap(v); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("schedule: one month gives one fit") {
  const MonthId m{2001, 5};
  const auto r = walk_forward(panel(), schedule(small_forest(), m, m));
  CHECK(r.fits.size() == 1);
  CHECK(r.fits[0].fit_month == MonthId{2001, 4});
  CHECK(r.fits[0].examples == 60);
  CHECK(r.scores.size() == 1);
  CHECK(r.scores.at(m).size() == 20);
}

TEST_CASE("schedule: retraining every third month") {
  const auto r = walk_forward(panel(), schedule(small_forest(), {2001, 5}, {2001, 10}, 3));
  REQUIRE(r.fits.size() == 2);
  CHECK(r.fits[0].fit_month == MonthId{2001, 4});
  CHECK(r.fits[1].fit_month == MonthId{2001, 7});
  CHECK(r.scores.size() == 6);
}

TEST_CASE("no look-ahead for every model family") {
  for (const auto& model : {small_net(), small_forest(), small_svr()}) {
    CAPTURE(model.name);
    AccessTrace trace;
    walk_forward(panel(), schedule(model, {2001, 5}, {2002, 1}, 2), WalkForwardOptions{&trace, nullptr});
    const auto reads = trace.reads();
    REQUIRE_FALSE(reads.empty());
    std::size_t targets = 0;
    for (const auto& r : reads) {
      if (r.kind == AccessTrace::Kind::Feature) {
        CHECK(r.month <= r.anchor);
        CHECK(r.anchor < r.context);
      } else {
        ++targets;
        CHECK(r.month <= r.context.minus_months(1));
      }
    }
    CHECK(targets > 0);
  }
}

TEST_CASE("scored stocks are the eligible universe at the prior month") {
  std::vector<FactorRecord> recs(panel().records().begin(), panel().records().end());
  // S1003 misses a factor at 2001-08, a lag of anchors 2001-08 and 2001-11 but not 2001-09
  for (auto& r : recs) {
    if (r.stock_id == "S1003" && r.month == MonthId{2001, 8}) r.factors[4] = std::numeric_limits<double>::quiet_NaN();
  }
  const auto p = FactorPanel::from_records(std::move(recs));
  const auto r = walk_forward(p, schedule(small_forest(), {2001, 9}, {2001, 12}));
  CHECK(r.scores.at({2001, 9}).size() == 19);
  CHECK(r.scores.at({2001, 9}).count("S1003") == 0);
  CHECK(r.scores.at({2001, 10}).size() == 20);
  CHECK(r.scores.at({2001, 11}).size() == 20);
  CHECK(r.scores.at({2001, 12}).size() == 19);
  // the fit at 2001-09 drops the ineligible example anchored at 2001-08
  CHECK(r.fits[1].examples == 59);
}

TEST_CASE("determinism and seed sensitivity") {
  const auto c = schedule(small_net(), {2001, 5}, {2001, 8});
  const auto a = walk_forward(panel(), c);
  const auto b = walk_forward(panel(), c);
  CHECK(a.scores == b.scores);
  auto c2 = c;
  c2.master_seed = 6;
  CHECK(walk_forward(panel(), c2).scores != a.scores);
  CHECK(fit_seed(5, {2001, 4}) == fit_seed(5, {2001, 4}));
  CHECK(fit_seed(5, {2001, 4}) != fit_seed(5, {2001, 5}));
}

TEST_CASE("history and config errors") {
  CHECK(kind_of([] { walk_forward(panel(), schedule(small_forest(), {2001, 4}, {2001, 5})); }) ==
        ErrorKind::InsufficientHistory);
  CHECK(kind_of([] { walk_forward(panel(), schedule(small_forest(), {2001, 5}, {2002, 2})); }) ==
        ErrorKind::InsufficientHistory);
  CHECK(kind_of([] { walk_forward(panel(), schedule(small_forest(), {2001, 6}, {2001, 5})); }) ==
        ErrorKind::InvalidConfig);
  CHECK(kind_of([] { walk_forward(panel(), schedule(small_forest(), {2001, 5}, {2001, 5}, 0)); }) ==
        ErrorKind::InvalidConfig);
  CHECK(kind_of([] {
          walk_forward(panel(), schedule(ensemble_model("E", {small_forest()}), {2001, 5}, {2001, 5}));
        }) == ErrorKind::InvalidConfig);
  CHECK(run_experiment(panel(), {}).empty());
}

TEST_CASE("ensemble combination") {
  const MonthId m{2002, 1};
  SUBCASE("identical sheets") {
    ScoreSheet a{{m, scores({{"A", 0.3}, {"B", 0.7}})}};
    CHECK(ensemble_scores({a, a, a}) == a);
  }
  SUBCASE("two members") {
    ScoreSheet a{{m, scores({{"A", 1.0}, {"B", 0.0}})}};
    ScoreSheet b{{m, scores({{"A", 0.0}, {"B", 1.0}})}};
    const auto e = ensemble_scores({a, b});
    CHECK(e.at(m).at("A") == 0.5);
    CHECK(e.at(m).at("B") == 0.5);
  }
  SUBCASE("intersection of stocks") {
    ScoreSheet a{{m, scores({{"A", 1.0}, {"B", 0.2}})}};
    ScoreSheet b{{m, scores({{"B", 0.4}, {"C", 0.9}})}};
    const auto e = ensemble_scores({a, b});
    REQUIRE(e.at(m).size() == 1);
    CHECK(e.at(m).at("B") == doctest::Approx(0.3).epsilon(1e-15));
  }
  SUBCASE("errors") {
    ScoreSheet a{{m, scores({{"A", 1.0}})}};
    ScoreSheet b{{m.plus_months(1), scores({{"A", 1.0}})}};
    ScoreSheet c{{m, scores({{"Z", 1.0}})}};
    CHECK(kind_of([&] { ensemble_scores({a, b}); }) == ErrorKind::MonthKeyMismatch);
    CHECK(kind_of([&] { ensemble_scores({a, c}); }) == ErrorKind::EmptyIntersection);
    CHECK(kind_of([&] { ensemble_scores({a}); }) == ErrorKind::InvalidConfig);
  }
  SUBCASE("mean of three is the correctly rounded value") {
    const double x = 0.1, y = 0.7, z = 0.3;
    ScoreSheet a{{m, scores({{"A", x}})}}, b{{m, scores({{"A", y}})}}, c{{m, scores({{"A", z}})}};
    // 0.1 + 0.7 + 0.3 is exact in extended precision; its third rounds to the double nearest 11/30
    CHECK(ensemble_scores({a, b, c}).at(m).at("A") == static_cast<double>((static_cast<long double>(x) + y + z) / 3));
    CHECK(std::abs(ensemble_scores({a, b, c}).at(m).at("A") - 11.0 / 30.0) <= 1e-16);
  }
}

TEST_CASE("experiment runs, reuses members and isolates failures") {
  const MonthId s{2001, 5}, e{2001, 9};
  const auto ens = ensemble_model("Ensemble[f+s]", {small_forest(), small_svr()});
  std::vector<WalkForwardConfig> configs{schedule(small_forest(), s, e), schedule(small_svr(), s, e),
                                         schedule(ens, s, e), schedule(small_forest(), {2000, 2}, e)};
  const auto results = run_experiment(panel(), configs, 2);
  REQUIRE(results.size() == 4);
  CHECK(results[0].ok());
  CHECK(results[1].ok());
  REQUIRE(results[2].ok());
  CHECK_FALSE(results[3].ok());
  CHECK(results[3].error.find("InsufficientHistory") != std::string::npos);

  const auto direct = walk_forward(panel(), configs[2]);
  CHECK(results[2].report->scores == direct.scores);
  CHECK(results[0].report->monthly.size() == 5);
  CHECK(results[0].report->strategy_quintile.has_value());
  for (const auto& [month, sheet] : results[2].report->scores) {
    for (const auto& [id, v] : sheet) {
      const double f = results[0].report->scores.at(month).at(id);
      const double g = results[1].report->scores.at(month).at(id);
      CHECK(v == (f + g) / 2.0);
    }
  }
}

TEST_CASE("evaluate_sheet judges month m against returns stored at m - 1") {
  const MonthId m{2001, 5};
  ScoreSheet sheet;
  for (const auto& rec : panel().records_at(m.minus_months(1))) sheet[m][rec.stock_id] = *rec.fwd_return;
  const auto rep = evaluate_sheet("oracle", panel(), sheet);
  REQUIRE(rep.monthly.size() == 1);
  CHECK(*rep.monthly[0].corr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.monthly[0].quintile.fraction == 1.0);
  CHECK_FALSE(rep.strategy_quintile.has_value());
}

TEST_CASE("group averages use the preset prefix") {
  const MonthId s{2001, 5}, e{2001, 6};
  mlp::TrainConfig t;
  t.epochs = 1;
  const auto results = run_experiment(panel(), {schedule(mlp_model("NN3_1", t), s, e), schedule(mlp_model("NN3_2", t), s, e),
                                                schedule(small_forest(), s, e)});
  const auto groups = group_averages(results);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].group == "NN3");
  CHECK(groups[0].members.size() == 2);
  const double expect = (results[0].report->summary.corr + results[1].report->summary.corr) / 2.0;
  CHECK(groups[0].corr == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("model names") {
  forest::ForestHyper f;
  f.max_features = 25;
  f.max_depth = 7;
  CHECK(forest_name(f) == "RF_mf25_md7");
  f.n_estimators = 10;
  CHECK(forest_name(f) == "RF_mf25_md7_n10");
  svr::SvrHyper h;
  h.C = 0.1;
  h.gamma = 0.01;
  h.epsilon = 0.1;
  CHECK(svr_name(h) == "SVR_C0.1_g0.01_e0.1");
}
