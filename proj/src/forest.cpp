#include "xsection/forest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs::forest {

void ForestHyper::validate(int n_features) const {
  if (n_estimators < 1) throw Error(ErrorKind::InvalidConfig, "n_estimators must be >= 1");
  if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "max_depth must be >= 1");
  if (max_features < 1 || max_features > n_features) {
    throw Error(ErrorKind::InvalidConfig,
                "max_features must lie in [1, " + std::to_string(n_features) + "], got " + std::to_string(max_features));
  }
}

std::vector<ForestHyper> rf_grid() {
  std::vector<ForestHyper> grid;
  auto add = [&](int mf, int md) {
    ForestHyper h;
    h.max_features = mf;
    h.max_depth = md;
    grid.push_back(h);
  };
  for (int mf : {5, 10, 15, 20}) {
    for (int md : {3, 5, 7, 9}) add(mf, md);
  }
  for (int mf : {25, 30, 35}) {
    for (int md : {3, 5, 7, 9, 11, 15, 20}) add(mf, md);
  }
  return grid;
}

double RegressionTree::predict(const double* row) const {
  int k = 0;
  while (nodes[k].feature >= 0) k = row[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
  return nodes[k].value;
}

namespace {

// Features mapped onto the sorted unique values of each column. Split search
// then works on bin indices, which is exact: every distinct value owns a bin.
struct BinnedData {
  int n_rows = 0;
  int n_features = 0;
  std::vector<std::vector<double>> uniques;  // per feature, ascending
  std::vector<std::uint32_t> bins;           // column-major n_rows x n_features
  std::size_t max_bins = 0;

  std::uint32_t bin(int row, int feature) const {
    return bins[static_cast<std::size_t>(feature) * static_cast<std::size_t>(n_rows) + static_cast<std::size_t>(row)];
  }
};

BinnedData bin_features(const Eigen::MatrixXd& x) {
  BinnedData data;
  data.n_rows = static_cast<int>(x.rows());
  data.n_features = static_cast<int>(x.cols());
  data.uniques.resize(static_cast<std::size_t>(data.n_features));
  data.bins.resize(static_cast<std::size_t>(x.size()));
  std::vector<double> col;
  for (int f = 0; f < data.n_features; ++f) {
    col.assign(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
    for (int r = 0; r < data.n_rows; ++r) {
      auto it = std::lower_bound(col.begin(), col.end(), x(r, f));
      data.bins[static_cast<std::size_t>(f) * static_cast<std::size_t>(data.n_rows) + static_cast<std::size_t>(r)] =
          static_cast<std::uint32_t>(it - col.begin());
    }
    data.max_bins = std::max(data.max_bins, col.size());
    data.uniques[static_cast<std::size_t>(f)] = std::move(col);
  }
  return data;
}

struct Split {
  int feature = -1;
  std::uint32_t left_max_bin = 0;  // rows with bin <= this go left
  double threshold = 0.0;
  double proxy = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, const Eigen::VectorXd& y, const std::vector<double>& weights,
              const ForestHyper& hyper, std::uint64_t seed)
      : data_(data), y_(y), weights_(weights), hyper_(hyper), rng_(seed),
        hist_w_(data.max_bins, 0.0), hist_wy_(data.max_bins, 0.0), features_(static_cast<std::size_t>(data.n_features)) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build() {
    std::vector<int> rows;
    for (int r = 0; r < data_.n_rows; ++r) {
      if (weights_[static_cast<std::size_t>(r)] > 0.0) rows.push_back(r);
    }
    if (rows.empty()) throw Error(ErrorKind::EmptyData, "tree has no samples");
    rows_ = std::move(rows);
    grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::size_t lo, std::size_t hi, int depth) {
    double w = 0.0, wy = 0.0;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -y_min;
    for (std::size_t i = lo; i < hi; ++i) {
      const int r = rows_[i];
      const double wi = weights_[static_cast<std::size_t>(r)];
      w += wi;
      wy += wi * y_(r);
      y_min = std::min(y_min, y_(r));
      y_max = std::max(y_max, y_(r));
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    // a pure node stores its target verbatim so constant targets stay exact
    tree_.nodes[static_cast<std::size_t>(id)].value = y_min == y_max ? y_min : wy / w;
    tree_.depth = std::max(tree_.depth, depth);

    if (depth >= hyper_.max_depth || hi - lo < 2 || y_min == y_max) return id;
    const Split split = best_split(lo, hi);
    if (split.feature < 0) return id;

    auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(lo), rows_.begin() + static_cast<std::ptrdiff_t>(hi),
                                 [&](int r) { return data_.bin(r, split.feature) <= split.left_max_bin; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

    const int left = grow(lo, mid, depth + 1);
    const int right = grow(mid, hi, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  Split best_split(std::size_t lo, std::size_t hi) {
    // max_features distinct candidates, then scanned in ascending index order
    const auto n_feat = features_.size();
    const auto k = static_cast<std::size_t>(hyper_.max_features);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n_feat - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    candidates_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(candidates_.begin(), candidates_.end());

    Split best;
    for (int f : candidates_) scan_feature(f, lo, hi, best);
    return best;
  }

  void consider(int f, std::uint32_t prev_bin, std::uint32_t next_bin, double wl, double sl, double wr, double sr,
                Split& best) {
    const double proxy = sl * sl / wl + sr * sr / wr;
    if (proxy > best.proxy) {
      const auto& u = data_.uniques[static_cast<std::size_t>(f)];
      double thr = 0.5 * (u[prev_bin] + u[next_bin]);
      if (thr >= u[next_bin]) thr = u[prev_bin];
      best = Split{f, prev_bin, thr, proxy};
    }
  }

  void scan_feature(int f, std::size_t lo, std::size_t hi, Split& best) {
    const std::size_t n = hi - lo;
    const std::size_t n_bins = data_.uniques[static_cast<std::size_t>(f)].size();
    if (n_bins < 2) return;
    double total_w = 0.0, total_s = 0.0;

    if (n * 8 < n_bins) {
      entries_.clear();
      for (std::size_t i = lo; i < hi; ++i) {
        const int r = rows_[i];
        const double wi = weights_[static_cast<std::size_t>(r)];
        entries_.push_back({data_.bin(r, f), wi, wi * y_(r)});
        total_w += wi;
        total_s += wi * y_(r);
      }
      std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.bin < b.bin; });
      double wl = 0.0, sl = 0.0;
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        wl += entries_[i].w;
        sl += entries_[i].wy;
        if (i + 1 < entries_.size() && entries_[i + 1].bin != entries_[i].bin) {
          consider(f, entries_[i].bin, entries_[i + 1].bin, wl, sl, total_w - wl, total_s - sl, best);
        }
      }
      return;
    }

    for (std::size_t i = lo; i < hi; ++i) {
      const int r = rows_[i];
      const double wi = weights_[static_cast<std::size_t>(r)];
      const auto b = data_.bin(r, f);
      hist_w_[b] += wi;
      hist_wy_[b] += wi * y_(r);
      total_w += wi;
      total_s += wi * y_(r);
    }
    double wl = 0.0, sl = 0.0;
    std::int64_t prev = -1;
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (hist_w_[b] == 0.0) continue;
      if (prev >= 0) {
        consider(f, static_cast<std::uint32_t>(prev), static_cast<std::uint32_t>(b), wl, sl, total_w - wl,
                 total_s - sl, best);
      }
      wl += hist_w_[b];
      sl += hist_wy_[b];
      prev = static_cast<std::int64_t>(b);
    }
    for (std::size_t i = lo; i < hi; ++i) {
      const auto b = data_.bin(rows_[i], f);
      hist_w_[b] = 0.0;
      hist_wy_[b] = 0.0;
    }
  }

  struct Entry {
    std::uint32_t bin;
    double w;
    double wy;
  };

  const BinnedData& data_;
  const Eigen::VectorXd& y_;
  const std::vector<double>& weights_;
  const ForestHyper& hyper_;
  std::mt19937_64 rng_;
  std::vector<double> hist_w_, hist_wy_;
  std::vector<int> features_;
  std::vector<int> candidates_;
  std::vector<Entry> entries_;
  std::vector<int> rows_;
  RegressionTree tree_;
};

void check_inputs(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  if (features.rows() == 0) throw Error(ErrorKind::EmptyData, "no training rows");
  if (features.rows() != targets.size()) throw Error(ErrorKind::LengthMismatch, "features and targets differ in length");
}

}  // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const ForestHyper& hyper,
                        std::uint64_t seed) {
  check_inputs(features, targets);
  hyper.validate(static_cast<int>(features.cols()));
  const auto data = bin_features(features);
  const std::vector<double> weights(static_cast<std::size_t>(features.rows()), 1.0);
  return TreeBuilder(data, targets, weights, hyper, seed).build();
}

Forest fit_forest(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const ForestHyper& hyper,
                  int threads) {
  check_inputs(features, targets);
  hyper.validate(static_cast<int>(features.cols()));
  const auto data = bin_features(features);
  Forest forest;
  forest.hyper = hyper;
  forest.n_features = static_cast<int>(features.cols());
  forest.trees.resize(static_cast<std::size_t>(hyper.n_estimators));
  const auto n = static_cast<std::size_t>(features.rows());

  auto fit_one = [&](std::size_t t) {
    const std::uint64_t tree_seed = mix_seed(hyper.seed, t);
    std::mt19937_64 rng(tree_seed);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<double> weights(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) weights[draw(rng)] += 1.0;
    forest.trees[t] = TreeBuilder(data, targets, weights, hyper, mix_seed(tree_seed, 1)).build();
  };

  const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
  if (n_threads == 1) {
    for (std::size_t t = 0; t < forest.trees.size(); ++t) fit_one(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < forest.trees.size(); t += n_threads) fit_one(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return forest;
}

Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& features) {
  if (features.cols() != forest.n_features) {
    throw Error(ErrorKind::DimensionMismatch, "forest expects " + std::to_string(forest.n_features) + " features");
  }
  Eigen::VectorXd out(features.rows());
  std::vector<double> row(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) row[static_cast<std::size_t>(c)] = features(i, c);
    // extended precision keeps an average of equal leaf values exact
    long double sum = 0.0L;
    for (const auto& tree : forest.trees) sum += tree.predict(row.data());
    out(i) = static_cast<double>(sum / static_cast<long double>(forest.trees.size()));
  }
  return out;
}

namespace {
constexpr const char* kMagic = "xsection-forest";
constexpr int kFormatVersion = 1;
}  // namespace

void save(const Forest& forest, std::ostream& out) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "hyper " << forest.hyper.n_estimators << ' ' << forest.hyper.max_features << ' ' << forest.hyper.max_depth
      << ' ' << forest.hyper.seed << '\n';
  out << "features " << forest.n_features << '\n';
  for (const auto& tree : forest.trees) {
    out << "tree " << tree.nodes.size() << ' ' << tree.depth << '\n';
    for (const auto& n : tree.nodes) {
      out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << format_double(n.value) << '\n';
    }
  }
}

Forest load(std::istream& in) {
  std::string magic, tag;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw Error(ErrorKind::Parse, "not a forest model stream");
  if (version != kFormatVersion) throw Error(ErrorKind::Parse, "unsupported forest format version");
  Forest forest;
  in >> tag >> forest.hyper.n_estimators >> forest.hyper.max_features >> forest.hyper.max_depth >> forest.hyper.seed;
  if (tag != "hyper") throw Error(ErrorKind::Parse, "expected hyper line");
  in >> tag >> forest.n_features;
  if (tag != "features") throw Error(ErrorKind::Parse, "expected features line");
  auto read_num = [&] {
    std::string tok;
    in >> tok;
    auto v = parse_double(tok);
    if (!v) throw Error(ErrorKind::Parse, "bad number in forest stream");
    return *v;
  };
  for (int t = 0; t < forest.hyper.n_estimators; ++t) {
    std::size_t n_nodes = 0;
    RegressionTree tree;
    in >> tag >> n_nodes >> tree.depth;
    if (!in || tag != "tree") throw Error(ErrorKind::Parse, "expected tree record");
    tree.nodes.resize(n_nodes);
    for (auto& n : tree.nodes) {
      in >> n.feature;
      n.threshold = read_num();
      in >> n.left >> n.right;
      n.value = read_num();
    }
    if (!in) throw Error(ErrorKind::Parse, "truncated forest stream");
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace xs::forest
