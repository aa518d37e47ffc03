#pragma once

// Independent reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "xsection/mlp.hpp"

namespace xs::oracle {

// Largest relative difference between backward() and central differences of
// the train-mode loss with fixed dropout masks. Magnitudes below `floor` are
// compared against `floor` so round-off on vanishing coordinates is not amplified.
inline double gradient_error(const mlp::NetworkState& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             std::uint64_t mask_seed, double h = 1e-6, double floor = 1e-4) {
  auto loss = [&](const mlp::NetworkState& n) {
    std::mt19937_64 rng(mask_seed);
    return mlp::mse_loss(mlp::forward(n, x, mlp::Mode::Train, &rng).output, y);
  };
  std::mt19937_64 rng(mask_seed);
  const auto cache = mlp::forward(net, x, mlp::Mode::Train, &rng);
  const auto grads = mlp::backward(net, cache, y);

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  auto probe = [&](auto&& param_of, double analytic) {
    auto plus = net;
    auto minus = net;
    param_of(plus) += h;
    param_of(minus) -= h;
    compare(analytic, (loss(plus) - loss(minus)) / (2.0 * h));
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
        probe([&](mlp::NetworkState& n) -> double& { return n.weights[l](r, c); }, grads.weights[l](r, c));
      }
    }
    for (Eigen::Index c = 0; c < net.biases[l].size(); ++c) {
      probe([&](mlp::NetworkState& n) -> double& { return n.biases[l](c); }, grads.biases[l](c));
    }
  }
  return worst;
}

struct SvrOracle {
  Eigen::VectorXd beta;
  double bias = 0.0;
  bool verified = false;  // KKT conditions of the dual hold to 1e-9

  Eigen::VectorXd predict(const Eigen::MatrixXd& train, const Eigen::MatrixXd& points, double gamma) const {
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      double s = bias;
      for (Eigen::Index i = 0; i < train.rows(); ++i) {
        s += beta(i) * std::exp(-gamma * (train.row(i) - points.row(p)).squaredNorm());
      }
      out(p) = s;
    }
    return out;
  }
};

// Dense epsilon-SVR dual over u = (alpha, alpha*):
//   min 1/2 (a - a*)' K (a - a*) + eps * sum(a + a*) - z'(a - a*)
//   s.t. sum(a - a*) = 0, 0 <= a, a* <= C
// by accelerated projected gradient with adaptive restart. The projection onto
// the constraint set is exact (root of a piecewise-linear function of the equality multiplier). The bias
// is the midpoint of the interval minimising the primal loss for the fitted w.
inline SvrOracle solve_svr_dual(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, double C, double gamma,
                                double eps, int max_iter = 200'000, double stop = 1e-12) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
  }
  Eigen::VectorXd y(2 * n), p(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = 1.0;
    y(i + n) = -1.0;
    p(i) = eps - z(i);
    p(i + n) = eps + z(i);
  }
  const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().maxCoeff();

  // phi(lambda) = y' clip(v - lambda y) is piecewise linear and non-increasing;
  // locate its root between sorted breakpoints and interpolate.
  auto project = [&](const Eigen::VectorXd& v) {
    auto at = [&](double lambda) { return (v - lambda * y).cwiseMax(0.0).cwiseMin(C).eval(); };
    auto phi = [&](double lambda) { return y.dot(at(lambda)); };
    std::vector<double> knots;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      knots.push_back(y(i) * v(i));
      knots.push_back(y(i) * (v(i) - y(i) * C));
    }
    std::sort(knots.begin(), knots.end());
    std::size_t lo = 0, hi = knots.size() - 1;
    if (phi(knots[lo]) <= 0.0) return at(knots[lo]);
    if (phi(knots[hi]) >= 0.0) return at(knots[hi]);
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (phi(knots[mid]) > 0.0 ? lo : hi) = mid;
    }
    const double a = phi(knots[lo]), b = phi(knots[hi]);
    return at(knots[lo] + (knots[hi] - knots[lo]) * a / (a - b));
  };
  auto gradient = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd kb = k * (u.head(n) - u.tail(n));
    Eigen::VectorXd g(2 * n);
    g.head(n) = kb;
    g.tail(n) = -kb;
    return (g + p).eval();
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd b = u.head(n) - u.tail(n);
    return 0.5 * b.dot(k * b) + p.dot(u);
  };

  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd w = u;
  double t = 1.0;
  double f_prev = objective(u);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd next = project(w - gradient(w) / lipschitz);
    const double f_next = objective(next);
    if (f_next > f_prev) {  // restart momentum
      t = 1.0;
      w = u;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = next + ((t - 1.0) / t_next) * (next - u);
    u = next;
    t = t_next;
    f_prev = f_next;
    // projected-gradient residual of the accepted iterate
    if (it % 50 == 0 && (u - project(u - gradient(u) / lipschitz)).lpNorm<Eigen::Infinity>() * lipschitz < stop) break;
  }

  // Finish with primal-dual active-set steps: fix bound variables, solve the
  // equality-constrained KKT system on the rest, then move variables whose
  // value or multiplier has the wrong sign. Accepted only once KKT verifies.
  const Eigen::Index m = 2 * n;
  Eigen::MatrixXd q(m, m);
  q << k, -k, -k, k;
  const double tol = 1e-9;
  std::vector<int> state(static_cast<std::size_t>(m));  // -1 at 0, +1 at C, 0 free
  for (Eigen::Index i = 0; i < m; ++i) {
    state[static_cast<std::size_t>(i)] = u(i) <= 1e-4 * C ? -1 : (u(i) >= C * (1.0 - 1e-4) ? 1 : 0);
  }
  bool verified = false;
  Eigen::VectorXd polished = u;
  for (int round = 0; round < 200 && !verified; ++round) {
    std::vector<Eigen::Index> free;
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int st = state[static_cast<std::size_t>(i)];
      if (st == 0) free.push_back(i);
      else fixed(i) = st > 0 ? C : 0.0;
    }
    const auto f = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(f + 1, f + 1);
    Eigen::VectorXd rhs(f + 1);
    const Eigen::VectorXd base = q * fixed + p;
    for (Eigen::Index a = 0; a < f; ++a) {
      for (Eigen::Index b = 0; b < f; ++b) sys(a, b) = q(free[a], free[b]);
      sys(a, f) = y(free[a]);
      sys(f, a) = y(free[a]);
      rhs(a) = -base(free[a]);
    }
    rhs(f) = -y.dot(fixed);
    const Eigen::VectorXd sol = sys.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd cand = fixed;
    for (Eigen::Index a = 0; a < f; ++a) cand(free[a]) = sol(a);
    double lambda = sol(f);
    if (f == 0) {
      // no free variable pins the multiplier; take the middle of the range the bounds allow
      const Eigen::VectorXd g0 = q * cand + p;
      double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
      for (Eigen::Index i = 0; i < m; ++i) {
        // state -1 needs g0 + lambda y >= 0, state +1 needs g0 + lambda y <= 0
        const double edge = -g0(i) / y(i);
        const bool lower = (state[static_cast<std::size_t>(i)] < 0) == (y(i) > 0);
        if (lower) lo = std::max(lo, edge);
        else hi = std::min(hi, edge);
      }
      lambda = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo : hi);
    }
    const Eigen::VectorXd grad = q * cand + p + lambda * y;

    bool changed = false;
    bool ok = std::abs(y.dot(cand)) <= tol && (sys * sol - rhs).lpNorm<Eigen::Infinity>() <= tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      int& st = state[static_cast<std::size_t>(i)];
      if (st == 0 && cand(i) < -tol) { st = -1; changed = true; ok = false; }
      else if (st == 0 && cand(i) > C + tol) { st = 1; changed = true; ok = false; }
      else if (st == -1 && grad(i) < -tol) { st = 0; changed = true; ok = false; }
      else if (st == 1 && grad(i) > tol) { st = 0; changed = true; ok = false; }
    }
    if (ok) {
      verified = true;
      polished = cand.cwiseMax(0.0).cwiseMin(C);
    } else if (!changed) {
      break;
    }
  }
  if (verified) u = polished;

  SvrOracle out;
  out.verified = verified;
  out.beta = u.head(n) - u.tail(n);
  const Eigen::VectorXd g = k * out.beta;
  std::vector<double> cand;
  for (Eigen::Index i = 0; i < n; ++i) {
    cand.push_back(z(i) - g(i) - eps);
    cand.push_back(z(i) - g(i) + eps);
  }
  auto loss = [&](double b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::max(0.0, std::abs(z(i) - g(i) - b) - eps);
    return s;
  };
  double best = std::numeric_limits<double>::infinity();
  for (double b : cand) best = std::min(best, loss(b));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double b : cand) {
    if (loss(b) <= best + 1e-12) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  }
  out.bias = 0.5 * (lo + hi);
  return out;
}

}  // namespace xs::oracle
