#include "xsection/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs {

namespace {

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string forest_name(const forest::ForestHyper& hyper) {
  std::string name = "RF_mf" + std::to_string(hyper.max_features) + "_md" + std::to_string(hyper.max_depth);
  if (hyper.n_estimators != 1000) name += "_n" + std::to_string(hyper.n_estimators);
  return name;
}

std::string svr_name(const svr::SvrHyper& hyper) {
  return "SVR_C" + compact(hyper.C) + "_g" + compact(hyper.gamma) + "_e" + compact(hyper.epsilon);
}

ModelSpec mlp_model(const std::string& preset, const mlp::TrainConfig& train) {
  return ModelSpec{preset, MlpModelSpec{mlp::find_preset(preset), train}};
}

ModelSpec forest_model(const forest::ForestHyper& hyper) { return ModelSpec{forest_name(hyper), hyper}; }

ModelSpec svr_model(const svr::SvrHyper& hyper) { return ModelSpec{svr_name(hyper), hyper}; }

ModelSpec ensemble_model(std::string name, std::vector<ModelSpec> members) {
  return ModelSpec{std::move(name), EnsembleSpec{std::move(members), false}};
}

Eigen::VectorXd ModelHandle::predict(const Eigen::MatrixXd& features) const {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, mlp::NetworkState>) return mlp::predict(m, features);
        else if constexpr (std::is_same_v<T, forest::Forest>) return forest::predict_forest(m, features);
        else return svr::predict_svr(m, features);
      },
      fitted);
}

FitOutcome fit_model(const ModelSpec& spec, const TrainingSet& data, std::uint64_t seed, int threads) {
  if (data.size() == 0) throw Error(ErrorKind::EmptyTrainingSet, spec.name + ": no training examples");
  FitOutcome out;
  out.model.name = spec.name;
  out.model.seed = seed;
  if (const auto* m = std::get_if<MlpModelSpec>(&spec.kind)) {
    auto cfg = m->train;
    cfg.seed = mix_seed(seed, 1);
    auto net = mlp::init_network(m->arch, mix_seed(seed, 0));
    out.train_mse = mlp::train(net, data, cfg).final_mse;
    out.model.fitted = std::move(net);
  } else if (const auto* f = std::get_if<forest::ForestHyper>(&spec.kind)) {
    auto hyper = *f;
    hyper.seed = seed;
    auto forest = forest::fit_forest(data.features, data.targets, hyper, threads);
    out.train_mse = mlp::mse_loss(forest::predict_forest(forest, data.features), data.targets);
    out.model.fitted = std::move(forest);
  } else if (const auto* s = std::get_if<svr::SvrHyper>(&spec.kind)) {
    auto fit = svr::fit_svr(data.features, data.targets, *s);
    out.solver_cap_hit = fit.info.hit_iteration_cap;
    out.train_mse = mlp::mse_loss(svr::predict_svr(fit.model, data.features), data.targets);
    out.model.fitted = std::move(fit.model);
  } else {
    throw Error(ErrorKind::InvalidConfig, spec.name + ": ensembles are fit member by member");
  }
  return out;
}

void WalkForwardConfig::validate() const {
  if (train_window < 1) throw Error(ErrorKind::InvalidConfig, "train_window must be >= 1");
  if (retrain_every < 1) throw Error(ErrorKind::InvalidConfig, "retrain_every must be >= 1");
  if (eval_end < eval_start) throw Error(ErrorKind::InvalidConfig, "eval_end precedes eval_start");
  if (const auto* e = std::get_if<EnsembleSpec>(&model.kind)) {
    if (e->members.size() < 2) throw Error(ErrorKind::InvalidConfig, model.name + ": ensemble needs >= 2 members");
  }
}

MonthId WalkForwardConfig::history_start() const {
  // first fit happens at eval_start - 1 and reaches back N months plus the lags
  return eval_start.minus_months(1 + train_window + kMaxLag);
}

std::uint64_t fit_seed(std::uint64_t master_seed, MonthId fit_month) {
  return mix_seed(master_seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(fit_month.index())));
}

namespace {

void check_history(const FactorPanel& panel, const WalkForwardConfig& config) {
  if (config.history_start() < panel.first_month()) {
    throw Error(ErrorKind::InsufficientHistory,
                config.model.name + ": evaluation from " + config.eval_start.to_string() + " with N=" +
                    std::to_string(config.train_window) + " needs data from " + config.history_start().to_string() +
                    ", panel starts " + panel.first_month().to_string());
  }
  if (config.eval_end.minus_months(1) > panel.last_month()) {
    throw Error(ErrorKind::InsufficientHistory,
                config.model.name + ": prediction month " + config.eval_end.to_string() +
                    " needs features anchored after the panel end " + panel.last_month().to_string());
  }
}

WalkForwardResult run_single(const FactorPanel& panel, const ScaledCache& cache, const WalkForwardConfig& config,
                             AccessTrace* trace) {
  WalkForwardResult result;
  std::optional<ModelHandle> model;
  int k = 0;
  for (MonthId m = config.eval_start; m <= config.eval_end; m = m.plus_months(1), ++k) {
    if (trace) trace->set_context(m);
    const MonthId anchor = m.minus_months(1);
    if (k % config.retrain_every == 0) {
      try {
        const auto data = assemble_training_set(panel, cache, anchor, config.train_window, trace);
        auto fit = fit_model(config.model, data, fit_seed(config.master_seed, anchor), config.threads);
        result.fits.push_back({config.model.name, anchor, data.size(), fit.train_mse, fit.solver_cap_hit});
        model = std::move(fit.model);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::InsufficientHistory || e.kind() == ErrorKind::InvalidConfig) throw;
        throw Error(ErrorKind::ModelFitFailure, config.model.name + " at " + anchor.to_string() + ": " + e.what());
      }
    }
    const auto batch = eligible_features(panel, cache, anchor, trace);
    auto& month_scores = result.scores[m];
    if (batch.stock_ids.empty()) continue;
    const Eigen::VectorXd pred = model->predict(batch.features);
    for (std::size_t i = 0; i < batch.stock_ids.size(); ++i) {
      month_scores.emplace(batch.stock_ids[i], pred(static_cast<Eigen::Index>(i)));
    }
  }
  return result;
}

}  // namespace

WalkForwardResult walk_forward(const FactorPanel& panel, const WalkForwardConfig& config,
                               const WalkForwardOptions& options) {
  config.validate();
  check_history(panel, config);
  std::optional<ScaledCache> own_cache;
  if (!options.cache) own_cache = ScaledCache::build(panel, config.history_start(), config.eval_end.minus_months(1));
  const ScaledCache& cache = options.cache ? *options.cache : *own_cache;

  if (const auto* e = std::get_if<EnsembleSpec>(&config.model.kind)) {
    WalkForwardResult result;
    std::vector<ScoreSheet> sheets;
    for (const auto& member : e->members) {
      auto member_config = config;
      member_config.model = member;
      auto r = walk_forward(panel, member_config, WalkForwardOptions{options.trace, &cache});
      sheets.push_back(std::move(r.scores));
      result.fits.insert(result.fits.end(), r.fits.begin(), r.fits.end());
    }
    result.scores = ensemble_scores(sheets, e->rank_average);
    return result;
  }
  return run_single(panel, cache, config, options.trace);
}

ScoreSheet ensemble_scores(const std::vector<ScoreSheet>& sheets, bool rank_average) {
  if (sheets.size() < 2) throw Error(ErrorKind::InvalidConfig, "ensemble needs at least 2 score sheets");
  for (const auto& s : sheets) {
    if (s.size() != sheets.front().size() ||
        !std::equal(s.begin(), s.end(), sheets.front().begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw Error(ErrorKind::MonthKeyMismatch, "score sheets cover different months");
    }
  }
  ScoreSheet out;
  for (const auto& [month, first_scores] : sheets.front()) {
    std::vector<ScoreMap> inputs;
    for (const auto& s : sheets) inputs.push_back(rank_average ? rank_scale(s.at(month)) : s.at(month));
    ScoreMap merged;
    for (const auto& [id, score] : inputs.front()) {
      // extended precision keeps the mean of identical scores exact
      long double sum = score;
      bool everywhere = true;
      for (std::size_t k = 1; k < inputs.size() && everywhere; ++k) {
        auto it = inputs[k].find(id);
        if (it == inputs[k].end()) everywhere = false;
        else sum += it->second;
      }
      if (everywhere) merged.emplace(id, static_cast<double>(sum / static_cast<long double>(inputs.size())));
    }
    if (merged.empty()) throw Error(ErrorKind::EmptyIntersection, "no common stocks in " + month.to_string());
    out.emplace(month, std::move(merged));
  }
  return out;
}

BacktestReport evaluate_sheet(const std::string& name, const FactorPanel& panel, const ScoreSheet& sheet) {
  BacktestReport report;
  report.name = name;
  report.scores = sheet;
  for (const auto& [month, scores] : sheet) {
    ScoreMap returns;
    for (const auto& rec : panel.records_at(month.minus_months(1))) {
      if (rec.fwd_return && scores.count(rec.stock_id)) returns.emplace(rec.stock_id, *rec.fwd_return);
    }
    report.monthly.push_back(evaluate_month(month, scores, returns));
    report.ls_tertile.push_back(ls_month(month, scores, returns, Bucket::Tertile));
    report.ls_quintile.push_back(ls_month(month, scores, returns, Bucket::Quintile));
  }
  report.summary = aggregate_monthly(report.monthly);
  if (report.ls_tertile.size() >= 2) {
    report.strategy_tertile = summarize_strategy(report.ls_tertile);
    report.strategy_quintile = summarize_strategy(report.ls_quintile);
  }
  return report;
}

namespace {

bool same_schedule(const WalkForwardConfig& a, const WalkForwardConfig& b) {
  return a.train_window == b.train_window && a.retrain_every == b.retrain_every && a.eval_start == b.eval_start &&
         a.eval_end == b.eval_end && a.master_seed == b.master_seed;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ExperimentResult> run_experiment(const FactorPanel& panel, const std::vector<WalkForwardConfig>& configs,
                                             int threads) {
  std::vector<ExperimentResult> results(configs.size());
  std::vector<std::optional<WalkForwardResult>> runs(configs.size());
  if (configs.empty()) return results;

  MonthId first = panel.last_month();
  MonthId last = panel.first_month();
  for (const auto& c : configs) {
    first = std::min(first, c.history_start());
    last = std::max(last, c.eval_end.minus_months(1));
  }
  const auto cache = ScaledCache::build(panel, first, last);

  auto run_one = [&](std::size_t i) {
    const auto& config = configs[i];
    results[i].name = config.model.name;
    try {
      runs[i] = walk_forward(panel, config, WalkForwardOptions{nullptr, &cache});
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  };

  std::vector<std::size_t> singles, ensembles;
  for (std::size_t i = 0; i < configs.size(); ++i) (configs[i].model.is_ensemble() ? ensembles : singles).push_back(i);
  parallel_for(singles.size(), threads, [&](std::size_t k) { run_one(singles[k]); });

  // ensembles reuse member runs that already exist with the same schedule
  parallel_for(ensembles.size(), threads, [&](std::size_t k) {
    const std::size_t i = ensembles[k];
    const auto& config = configs[i];
    const auto& spec = std::get<EnsembleSpec>(config.model.kind);
    results[i].name = config.model.name;
    try {
      config.validate();
      check_history(panel, config);
      WalkForwardResult combined;
      std::vector<ScoreSheet> sheets;
      for (const auto& member : spec.members) {
        const WalkForwardResult* reuse = nullptr;
        for (std::size_t s : singles) {
          if (configs[s].model.name == member.name && same_schedule(configs[s], config) && runs[s]) reuse = &*runs[s];
        }
        if (reuse) {
          sheets.push_back(reuse->scores);
          combined.fits.insert(combined.fits.end(), reuse->fits.begin(), reuse->fits.end());
        } else {
          auto member_config = config;
          member_config.model = member;
          auto r = walk_forward(panel, member_config, WalkForwardOptions{nullptr, &cache});
          sheets.push_back(std::move(r.scores));
          combined.fits.insert(combined.fits.end(), r.fits.begin(), r.fits.end());
        }
      }
      combined.scores = ensemble_scores(sheets, spec.rank_average);
      runs[i] = std::move(combined);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });

  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!runs[i]) continue;
    try {
      auto report = evaluate_sheet(configs[i].model.name, panel, runs[i]->scores);
      report.config = configs[i];
      report.fits = std::move(runs[i]->fits);
      results[i].report = std::move(report);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  }
  return results;
}

std::vector<GroupAverage> group_averages(const std::vector<ExperimentResult>& results) {
  static const std::vector<std::string> kGroups{"DNN8", "DNN5", "NN3_DO", "NN3"};
  auto group_of = [](const std::string& name) -> std::string {
    for (const auto& a : mlp::table3_presets()) {
      if (a.name == name) return name.substr(0, name.rfind('_'));
    }
    return {};
  };
  std::vector<GroupAverage> out;
  for (const auto& g : kGroups) {
    GroupAverage avg;
    avg.group = g;
    for (const auto& r : results) {
      if (!r.ok() || group_of(r.name) != g) continue;
      avg.members.push_back(r.name);
      avg.corr += r.report->summary.corr;
      avg.tertile_fraction += r.report->summary.tertile.fraction;
      avg.quintile_fraction += r.report->summary.quintile.fraction;
      avg.mse += r.report->summary.mse;
    }
    if (avg.members.empty()) continue;
    const double n = static_cast<double>(avg.members.size());
    avg.corr /= n;
    avg.tertile_fraction /= n;
    avg.quintile_fraction /= n;
    avg.mse /= n;
    out.push_back(std::move(avg));
  }
  return out;
}

}  // namespace xs
