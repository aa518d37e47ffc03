#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "xsection/forest.hpp"
#include "xsection/metrics.hpp"
#include "xsection/mlp.hpp"
#include "xsection/panel.hpp"
#include "xsection/portfolio.hpp"
#include "xsection/preprocess.hpp"
#include "xsection/svr.hpp"

namespace xs {

struct MlpModelSpec {
  mlp::ArchitectureSpec arch;
  mlp::TrainConfig train;  // seed is replaced by the per-fit seed
};

struct ModelSpec;

struct EnsembleSpec {
  std::vector<ModelSpec> members;
  bool rank_average = false;  // rank-scale each member's month before averaging
};

struct ModelSpec {
  std::string name;
  std::variant<MlpModelSpec, forest::ForestHyper, svr::SvrHyper, EnsembleSpec> kind;

  bool is_ensemble() const { return std::holds_alternative<EnsembleSpec>(kind); }
};

ModelSpec mlp_model(const std::string& preset, const mlp::TrainConfig& train = {});
ModelSpec forest_model(const forest::ForestHyper& hyper);
ModelSpec svr_model(const svr::SvrHyper& hyper);
ModelSpec ensemble_model(std::string name, std::vector<ModelSpec> members);

std::string forest_name(const forest::ForestHyper& hyper);  // e.g. RF_mf25_md7
std::string svr_name(const svr::SvrHyper& hyper);           // e.g. SVR_C0.1_g0.01_e0.1

struct ModelHandle {
  std::string name;
  std::uint64_t seed = 0;
  std::variant<mlp::NetworkState, forest::Forest, svr::SvrModel> fitted;

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

struct FitOutcome {
  ModelHandle model;
  double train_mse = 0.0;
  bool solver_cap_hit = false;
};

// Cold fit of a single (non-ensemble) model. `threads` parallelises forest trees.
FitOutcome fit_model(const ModelSpec& spec, const TrainingSet& data, std::uint64_t seed, int threads = 1);

struct WalkForwardConfig {
  int train_window = 120;  // N months
  int retrain_every = 1;
  MonthId eval_start;      // first prediction month
  MonthId eval_end;        // last prediction month
  ModelSpec model;
  std::uint64_t master_seed = 0;
  int threads = 1;

  void validate() const;
  // Earliest panel month the run reads.
  MonthId history_start() const;
};

// Per-fit seed; depends only on the master seed and the fit month.
std::uint64_t fit_seed(std::uint64_t master_seed, MonthId fit_month);

// prediction month -> stock -> score
using ScoreSheet = std::map<MonthId, ScoreMap>;

struct FitDiagnostic {
  std::string member;  // model name (ensemble member for ensembles)
  MonthId fit_month;   // returns realized through this month are usable
  std::size_t examples = 0;
  double train_mse = 0.0;
  bool solver_cap_hit = false;
};

struct WalkForwardResult {
  ScoreSheet scores;
  std::vector<FitDiagnostic> fits;
};

struct WalkForwardOptions {
  AccessTrace* trace = nullptr;
  const ScaledCache* cache = nullptr;  // built on demand when absent
};

// For every prediction month m the model is fit at m - 1 on the latest N
// months of realized returns and scores the eligible universe anchored at m - 1.
WalkForwardResult walk_forward(const FactorPanel& panel, const WalkForwardConfig& config,
                               const WalkForwardOptions& options = {});

// Per (month, stock) arithmetic mean over the stocks common to all sheets.
ScoreSheet ensemble_scores(const std::vector<ScoreSheet>& sheets, bool rank_average = false);

struct BacktestReport {
  std::string name;
  WalkForwardConfig config;
  std::vector<MonthlyEval> monthly;
  std::vector<LsMonthReturn> ls_tertile;
  std::vector<LsMonthReturn> ls_quintile;
  SummaryRow summary;
  std::optional<StrategySummary> strategy_tertile;   // empty with fewer than 2 months
  std::optional<StrategySummary> strategy_quintile;
  std::vector<FitDiagnostic> fits;
  ScoreSheet scores;
};

// Scores for month m are judged against the returns stored at m - 1.
BacktestReport evaluate_sheet(const std::string& name, const FactorPanel& panel, const ScoreSheet& sheet);

struct ExperimentResult {
  std::string name;
  std::optional<BacktestReport> report;
  std::string error;  // set when the config failed

  bool ok() const { return report.has_value(); }
};

// Runs configs on up to `threads` workers; results keep the input order.
// Ensemble members matching another config (same name and schedule) reuse its scores.
std::vector<ExperimentResult> run_experiment(const FactorPanel& panel, const std::vector<WalkForwardConfig>& configs,
                                             int threads = 1);

struct GroupAverage {
  std::string group;  // DNN8, DNN5, NN3_DO, NN3
  std::vector<std::string> members;
  double corr = 0.0;
  double tertile_fraction = 0.0;
  double quintile_fraction = 0.0;
  double mse = 0.0;
};

// Category averages for the network presets present among successful results.
std::vector<GroupAverage> group_averages(const std::vector<ExperimentResult>& results);

}  // namespace xs
