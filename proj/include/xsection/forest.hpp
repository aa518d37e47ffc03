#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace xs::forest {

inline constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

struct ForestHyper {
  int n_estimators = 1000;
  int max_features = 25;
  int max_depth = 7;
  std::uint64_t seed = 0;

  void validate(int n_features) const;
};

// {5,10,15,20} x {3,5,7,9} followed by {25,30,35} x {3,5,7,9,11,15,20}.
std::vector<ForestHyper> rf_grid();

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // weighted mean target of the node's samples
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int depth = 0;

  double predict(const double* row) const;
};

// Single CART tree on every row with unit weight (no bootstrap).
RegressionTree fit_tree(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                        const ForestHyper& hyper, std::uint64_t seed);

struct Forest {
  ForestHyper hyper;
  int n_features = 0;
  std::vector<RegressionTree> trees;
};

// Each tree sees a same-size bootstrap sample drawn with seed mix_seed(hyper.seed, tree index).
Forest fit_forest(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const ForestHyper& hyper,
                  int threads = 1);

Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& features);

void save(const Forest& forest, std::ostream& out);
Forest load(std::istream& in);

}  // namespace xs::forest
