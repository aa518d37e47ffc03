#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace xs::svr {

struct SvrHyper {
  double C = 1.0;
  double gamma = 0.01;
  double epsilon = 0.1;
  double tolerance = 1e-3;
  std::int64_t max_iterations = 1'000'000;
  std::size_t cache_bytes = std::size_t{256} << 20;

  void validate() const;
};

// C in {0.1, 1, 10} x gamma in {1e-4, 1e-3, 1e-2, 1e-1} x epsilon in {0.01, 0.1}.
std::vector<SvrHyper> svr_grid();

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma);

struct SvrModel {
  Eigen::MatrixXd support_vectors;  // one row per support vector
  Eigen::VectorXd coefficients;     // beta_i = alpha_i - alpha_i*, |beta_i| <= C
  double bias = 0.0;
  double gamma = 0.0;
};

struct SvrFitInfo {
  std::int64_t iterations = 0;
  bool hit_iteration_cap = false;
  double final_gap = 0.0;                // max violating-pair gap at exit
  std::vector<double> dual_objective;    // per accepted step, only when requested
  std::vector<double> coefficient_sums;  // sum of beta after each step, only when requested
};

struct FitOptions {
  bool record_trace = false;
  // Stop after this many pair updates regardless of max_iterations (for tests).
  std::int64_t truncate_after = -1;
};

struct SvrFit {
  SvrModel model;
  Eigen::VectorXd beta;  // one entry per training example, zeros included
  SvrFitInfo info;
};

// Dual epsilon-SVR solved with SMO. Hitting the iteration cap is reported in
// info.hit_iteration_cap and the partial solution is returned.
SvrFit fit_svr(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const SvrHyper& hyper,
               const FitOptions& options = {});

Eigen::VectorXd predict_svr(const SvrModel& model, const Eigen::MatrixXd& features);

// Largest KKT violation over all examples for a model whose coefficients are
// `beta` (aligned with the training rows).
double kkt_report(const SvrModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& targets, const SvrHyper& hyper);

void save(const SvrModel& model, std::ostream& out);
SvrModel load(std::istream& in);

}  // namespace xs::svr
