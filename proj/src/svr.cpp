#include "xsection/svr.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <list>
#include <ostream>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs::svr {

void SvrHyper::validate() const {
  if (!(C > 0.0)) throw Error(ErrorKind::InvalidConfig, "SVR C must be > 0");
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidConfig, "SVR gamma must be > 0");
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidConfig, "SVR epsilon must be >= 0");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidConfig, "SVR tolerance must be > 0");
  if (max_iterations < 1) throw Error(ErrorKind::InvalidConfig, "SVR max_iterations must be >= 1");
}

std::vector<SvrHyper> svr_grid() {
  std::vector<SvrHyper> grid;
  for (double c : {0.1, 1.0, 10.0}) {
    for (double g : {1e-4, 1e-3, 1e-2, 1e-1}) {
      for (double e : {0.01, 0.1}) {
        SvrHyper h;
        h.C = c;
        h.gamma = g;
        h.epsilon = e;
        grid.push_back(h);
      }
    }
  }
  return grid;
}

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "kernel arguments differ in length");
  return std::exp(-gamma * (x - y).squaredNorm());
}

namespace {

constexpr double kTau = 1e-12;

// LRU cache of kernel rows K(i, .) over the training examples.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& x, double gamma, std::size_t cache_bytes)
      : x_(x), gamma_(gamma), norms_(x.rowwise().squaredNorm()), rows_(static_cast<std::size_t>(x.rows())),
        where_(static_cast<std::size_t>(x.rows())) {
    const std::size_t row_bytes = static_cast<std::size_t>(x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, cache_bytes / std::max<std::size_t>(row_bytes, 1));
  }

  const Eigen::VectorXd& row(Eigen::Index i) {
    const auto k = static_cast<std::size_t>(i);
    if (rows_[k].size() > 0) {
      lru_.splice(lru_.begin(), lru_, where_[k]);
      return rows_[k];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      rows_[victim].resize(0);
    }
    Eigen::VectorXd dots = x_ * x_.row(i).transpose();
    rows_[k] = (-gamma_ * ((norms_.array() + norms_(i)) - 2.0 * dots.array()).max(0.0)).exp().matrix();
    rows_[k](i) = 1.0;
    lru_.push_front(k);
    where_[k] = lru_.begin();
    return rows_[k];
  }

 private:
  const Eigen::MatrixXd& x_;
  double gamma_;
  Eigen::VectorXd norms_;
  std::vector<Eigen::VectorXd> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
  std::size_t capacity_ = 2;
};

// Variables t in [0, 2K): t < K are alpha (y = +1), t >= K are alpha* (y = -1).
class Solver {
 public:
  Solver(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const SvrHyper& hyper)
      : n_(x.rows()), hyper_(hyper), kernel_(x, hyper.gamma, hyper.cache_bytes), alpha_(Eigen::VectorXd::Zero(2 * n_)),
        grad_(2 * n_), p_(2 * n_) {
    for (Eigen::Index i = 0; i < n_; ++i) {
      p_(i) = hyper.epsilon - z(i);
      p_(i + n_) = hyper.epsilon + z(i);
    }
    grad_ = p_;
  }

  SvrFitInfo solve(const FitOptions& options) {
    SvrFitInfo info;
    const std::int64_t limit =
        options.truncate_after >= 0 ? std::min(options.truncate_after, hyper_.max_iterations) : hyper_.max_iterations;
    while (true) {
      Eigen::Index i = -1, j = -1, j_first = -1;
      const double gap = select(i, j, j_first);
      info.final_gap = gap;
      if (i < 0 || j < 0 || gap < hyper_.tolerance) break;
      if (info.iterations >= limit) {
        info.hit_iteration_cap = true;
        break;
      }
      bool moved = update(i, j);
      if (!moved && j_first >= 0 && j_first != j) moved = update(i, j_first);
      if (!moved) break;  // numerically stalled: no pair makes progress
      ++info.iterations;
      if (options.record_trace) {
        info.dual_objective.push_back(dual_objective());
        info.coefficient_sums.push_back(beta().sum());
      }
    }
    return info;
  }

  Eigen::VectorXd beta() const { return alpha_.head(n_) - alpha_.tail(n_); }

  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -ub;
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      const double y = sign(t);
      const double yg = y * grad_(t);
      if (at_upper(t)) {
        if (y < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (y > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    return -rho;
  }

 private:
  double sign(Eigen::Index t) const { return t < n_ ? 1.0 : -1.0; }
  Eigen::Index base(Eigen::Index t) const { return t < n_ ? t : t - n_; }
  bool at_upper(Eigen::Index t) const { return alpha_(t) >= hyper_.C; }
  bool at_lower(Eigen::Index t) const { return alpha_(t) <= 0.0; }

  // Returns the maximal violating-pair gap; i maximises the violation, j the
  // second-order objective gain, j_first the first-order partner.
  double select(Eigen::Index& i, Eigen::Index& j, Eigen::Index& j_first) {
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      if (sign(t) > 0) {
        if (!at_upper(t) && -grad_(t) >= gmax) { gmax = -grad_(t); i = t; }
      } else {
        if (!at_lower(t) && grad_(t) >= gmax) { gmax = grad_(t); i = t; }
      }
    }
    if (i < 0) return 0.0;
    const Eigen::VectorXd& ki = kernel_.row(base(i));
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      const double kit = ki(base(t));
      double grad_diff;
      if (sign(t) > 0) {
        if (at_lower(t)) continue;
        grad_diff = gmax + grad_(t);
        if (grad_(t) >= gmax2) { gmax2 = grad_(t); j_first = t; }
      } else {
        if (at_upper(t)) continue;
        grad_diff = gmax - grad_(t);
        if (-grad_(t) >= gmax2) { gmax2 = -grad_(t); j_first = t; }
      }
      if (grad_diff > 0.0) {
        double quad = 2.0 - 2.0 * kit;
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) { best_obj = obj; j = t; }
      }
    }
    return gmax + gmax2;
  }

  bool update(Eigen::Index i, Eigen::Index j) {
    const double c = hyper_.C;
    const Eigen::VectorXd ki = kernel_.row(base(i));
    const Eigen::VectorXd& kj = kernel_.row(base(j));
    const double yi = sign(i), yj = sign(j);
    const double qij = yi * yj * ki(base(j));
    const double old_ai = alpha_(i), old_aj = alpha_(j);
    double& ai = alpha_(i);
    double& aj = alpha_(j);
    if (yi != yj) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_(i) - grad_(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > c) { ai = c; aj = c - diff; }
      } else {
        if (aj > c) { aj = c; ai = c + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_(i) - grad_(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) { ai = c; aj = sum - c; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > c) {
        if (aj > c) { aj = c; ai = sum - c; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }
    const double dai = ai - old_ai;
    const double daj = aj - old_aj;
    if (dai == 0.0 && daj == 0.0) return false;
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      const double yt = sign(t);
      const Eigen::Index b = base(t);
      grad_(t) += yt * (yi * ki(b) * dai + yj * kj(b) * daj);
    }
    return true;
  }

  // Maximisation form of the dual: -(1/2 a'Qa + p'a).
  double dual_objective() const { return -0.5 * alpha_.dot(grad_ + p_); }

  Eigen::Index n_;
  SvrHyper hyper_;
  KernelRows kernel_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd grad_;
  Eigen::VectorXd p_;
};

}  // namespace

SvrFit fit_svr(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const SvrHyper& hyper,
               const FitOptions& options) {
  hyper.validate();
  if (features.rows() != targets.size()) throw Error(ErrorKind::LengthMismatch, "features and targets differ in length");
  if (features.rows() < 2) throw Error(ErrorKind::TooFewExamples, "SVR needs at least 2 examples");
  if (!features.allFinite() || !targets.allFinite()) throw Error(ErrorKind::NonFiniteFeature, "non-finite SVR input");

  Solver solver(features, targets, hyper);
  SvrFit fit;
  fit.info = solver.solve(options);
  fit.beta = solver.beta();
  fit.model.gamma = hyper.gamma;
  fit.model.bias = solver.bias();
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i) {
    if (fit.beta(i) != 0.0) sv.push_back(i);
  }
  fit.model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), features.cols());
  fit.model.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    fit.model.support_vectors.row(static_cast<Eigen::Index>(k)) = features.row(sv[k]);
    fit.model.coefficients(static_cast<Eigen::Index>(k)) = fit.beta(sv[k]);
  }
  return fit;
}

Eigen::VectorXd predict_svr(const SvrModel& model, const Eigen::MatrixXd& features) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(features.rows(), model.bias);
  if (model.coefficients.size() == 0) return out;
  if (features.cols() != model.support_vectors.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "SVR expects " + std::to_string(model.support_vectors.cols()) + " features");
  }
  const Eigen::VectorXd sv_norms = model.support_vectors.rowwise().squaredNorm();
  const Eigen::VectorXd x_norms = features.rowwise().squaredNorm();
  const Eigen::MatrixXd dots = features * model.support_vectors.transpose();  // n x s
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const Eigen::ArrayXd d2 = ((sv_norms.array() + x_norms(r)) - 2.0 * dots.row(r).transpose().array()).max(0.0);
    out(r) += ((-model.gamma * d2).exp() * model.coefficients.array()).sum();
  }
  return out;
}

double kkt_report(const SvrModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& targets, const SvrHyper& hyper) {
  const Eigen::VectorXd f = predict_svr(model, features);
  const double eps = hyper.epsilon;
  const double c = hyper.C;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    const double e = targets(i) - f(i);
    const double a = std::max(beta(i), 0.0);
    const double a_star = std::max(-beta(i), 0.0);
    double v_up;
    if (a <= 0.0) v_up = std::max(0.0, e - eps);
    else if (a >= c) v_up = std::max(0.0, eps - e);
    else v_up = std::abs(e - eps);
    double v_down;
    if (a_star <= 0.0) v_down = std::max(0.0, -eps - e);
    else if (a_star >= c) v_down = std::max(0.0, e + eps);
    else v_down = std::abs(e + eps);
    worst = std::max({worst, v_up, v_down});
  }
  return worst;
}

namespace {
constexpr const char* kMagic = "xsection-svr";
constexpr int kFormatVersion = 1;
}  // namespace

void save(const SvrModel& model, std::ostream& out) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "gamma " << format_double(model.gamma) << '\n';
  out << "bias " << format_double(model.bias) << '\n';
  out << "sv " << model.support_vectors.rows() << ' ' << model.support_vectors.cols() << '\n';
  for (Eigen::Index r = 0; r < model.support_vectors.rows(); ++r) {
    out << format_double(model.coefficients(r));
    for (Eigen::Index c = 0; c < model.support_vectors.cols(); ++c) out << ' ' << format_double(model.support_vectors(r, c));
    out << '\n';
  }
}

SvrModel load(std::istream& in) {
  std::string magic, tag, tok;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw Error(ErrorKind::Parse, "not an svr model stream");
  if (version != kFormatVersion) throw Error(ErrorKind::Parse, "unsupported svr format version");
  auto num = [&] {
    in >> tok;
    auto v = parse_double(tok);
    if (!v) throw Error(ErrorKind::Parse, "bad number in svr stream");
    return *v;
  };
  SvrModel m;
  in >> tag;
  m.gamma = num();
  in >> tag;
  m.bias = num();
  Eigen::Index rows = 0, cols = 0;
  in >> tag >> rows >> cols;
  if (!in || tag != "sv") throw Error(ErrorKind::Parse, "bad svr header");
  m.support_vectors.resize(rows, cols);
  m.coefficients.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    m.coefficients(r) = num();
    for (Eigen::Index c = 0; c < cols; ++c) m.support_vectors(r, c) = num();
  }
  return m;
}

}  // namespace xs::svr
