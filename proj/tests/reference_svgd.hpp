#pragma once

// Plain SVGD written out with explicit loops, used as an oracle for the
// solvers' zero-weight collapse. It shares no code with the library; the
// arithmetic is ordered the same way so results can be compared bit for bit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace reference {

struct Target {
  std::function<double(const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_f;
  double alpha = 1.0;
};

inline double bandwidth(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) return 1.0;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < X.cols(); ++k) s += (X(i, k) - X(j, k)) * (X(i, k) - X(j, k));
      d.push_back(std::sqrt(s));
    }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double med = m % 2 ? d[m / 2] : 0.5 * (d[m / 2] + d[m / 2 - 1]);
  if (med == 0.0) return 1.0;
  return med * med / std::log(static_cast<double>(n) + 1.0);
}

inline double objective(const Target& T, const Eigen::MatrixXd& X) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) total += T.alpha * T.f(X.row(i).transpose());
  return total;
}

// One sweep: direction, then a shared step from backtracking (or eps0 when
// line_search is off).
inline void step(const Target& T, Eigen::MatrixXd& X, double eps0, double beta, int max_backtracks,
                 double min_eps, bool line_search) {
  const Eigen::Index n = X.rows(), d = X.cols();
  const double h = bandwidth(X);
  Eigen::MatrixXd g(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd gf = T.grad_f(X.row(i).transpose());
    for (Eigen::Index k = 0; k < d; ++k) g(i, k) = -T.alpha * gf[k];
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double kij = 1.0;
      if (i != j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) s += (X(j, k) - X(i, k)) * (X(j, k) - X(i, k));
        kij = std::exp(-s / h);
      }
      for (Eigen::Index k = 0; k < d; ++k) {
        phi(i, k) += kij * g(j, k) + (2.0 / h * kij) * (X(i, k) - X(j, k));
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) phi(i, k) /= static_cast<double>(n);

  double eps = eps0;
  if (line_search) {
    const double f0 = objective(T, X);
    eps = min_eps;
    double trial_eps = eps0;
    for (int b = 0; b <= max_backtracks; ++b, trial_eps *= beta) {
      const double ft = objective(T, X + trial_eps * phi);
      if (std::isfinite(ft) && ft < f0) {
        eps = trial_eps;
        break;
      }
    }
  }
  X += eps * phi;
}

}  // namespace reference
