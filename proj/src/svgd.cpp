#include "csvgd/svgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csvgd/errors.hpp"

namespace csvgd {

void StepControl::validate() const {
  if (!(min_eps > 0.0) || !(eps0 > min_eps)) {
    throw ParameterError("step control requires eps0 > min_eps > 0");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ParameterError("step control requires 0 < beta < 1");
  }
  if (max_backtracks < 0) {
    throw ParameterError("max_backtracks must be nonnegative");
  }
}

double median_bandwidth_from_distances(std::vector<double> distances, Eigen::Index n) {
  if (n < 2 || distances.empty()) {
    throw DegenerateInputError("median heuristic needs at least two particles");
  }
  const std::size_t m = distances.size();
  const std::size_t mid = m / 2;
  std::nth_element(distances.begin(), distances.begin() + mid, distances.end());
  double med = distances[mid];
  if (m % 2 == 0) {
    const double lower = *std::max_element(distances.begin(), distances.begin() + mid);
    med = 0.5 * (med + lower);
  }
  if (med == 0.0) return 1.0;
  return med * med / std::log(static_cast<double>(n) + 1.0);
}

double median_bandwidth(const ParticleSet& X) {
  const Eigen::Index n = X.size();
  if (n < 2) throw DegenerateInputError("median heuristic needs at least two particles");
  const Eigen::MatrixXd& P = X.positions();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist.push_back((P.row(i) - P.row(j)).norm());
    }
  }
  return median_bandwidth_from_distances(std::move(dist), n);
}

KernelEval rbf_kernel(const ParticleSet& X, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ParameterError("kernel bandwidth must be positive and finite");
  }
  const Eigen::Index n = X.size();
  const Eigen::Index d = X.dim();
  const Eigen::MatrixXd& P = X.positions();

  KernelEval ker;
  ker.K.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ker.K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double k = std::exp(-(P.row(i) - P.row(j)).squaredNorm() / h);
      ker.K(i, j) = k;
      ker.K(j, i) = k;
    }
  }
  ker.grad.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(n, d));
  const double scale = 2.0 / h;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::MatrixXd& G = ker.grad[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      G.row(i) = (scale * ker.K(j, i)) * (P.row(i) - P.row(j));
    }
  }
  return ker;
}

namespace {

// Gradient coordinates of each pose: maps a parameter perturbation to the
// right-perturbation eta of T_j (T_j Exp(eta)).
KernelEval se3_kernel_impl(const std::vector<Transform>& poses,
                           const std::vector<Matrix6>& param_maps, double h,
                           const Vector6& weights) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ParameterError("kernel bandwidth must be positive and finite");
  }
  const auto n = static_cast<Eigen::Index>(poses.size());
  if (n < 1) throw ContractError("se3 kernel needs at least one pose");
  for (const Transform& T : poses) {
    if (!T.is_valid()) throw GeometryError("se3 kernel: invalid rigid transform");
  }
  std::vector<Transform> inverses;
  inverses.reserve(poses.size());
  for (const Transform& T : poses) inverses.push_back(T.inverse());

  KernelEval ker;
  ker.K.resize(n, n);
  ker.grad.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(n, 6));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) {
        ker.K(j, j) = 1.0;
        ker.grad[sj].row(i).setZero();
        continue;
      }
      const Screw xi = se3_log_any(inverses[sj] * poses[static_cast<std::size_t>(i)]);
      const Vector6 wxi = weights.cwiseProduct(xi);
      const double k = std::exp(-xi.dot(wxi) / h);
      ker.K(j, i) = k;
      // d xi / d eta_j = -J_l⁻¹(xi); d k / d xi = -(2k/h) (W xi)ᵀ
      const Vector6 g = (2.0 * k / h) * (param_maps[sj].transpose() *
                                         (se3_left_jacobian_inverse(xi).transpose() * wxi));
      ker.grad[sj].row(i) = g.transpose();
    }
  }
  return ker;
}

std::vector<Transform> poses_of(const ParticleSet& pose_params) {
  if (pose_params.dim() != 6) {
    throw ContractError("se3 kernel particles must be 6-vectors [t; rotation vector]");
  }
  std::vector<Transform> poses;
  poses.reserve(static_cast<std::size_t>(pose_params.size()));
  for (Eigen::Index i = 0; i < pose_params.size(); ++i) {
    poses.push_back(pose_from_params(pose_params.positions().row(i).transpose()));
  }
  return poses;
}

}  // namespace

KernelEval se3_kernel(const std::vector<Transform>& poses, double h, const Vector6& weights) {
  const std::vector<Matrix6> identity(poses.size(), Matrix6::Identity());
  return se3_kernel_impl(poses, identity, h, weights);
}

KernelEval se3_kernel(const ParticleSet& pose_params, double h, const Vector6& weights) {
  const std::vector<Transform> poses = poses_of(pose_params);
  std::vector<Matrix6> maps;
  maps.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Vector3d w =
        pose_params.positions().row(static_cast<Eigen::Index>(i)).tail<3>().transpose();
    Matrix6 B = Matrix6::Zero();
    B.topLeftCorner<3, 3>() = poses[i].R.transpose();
    B.bottomRightCorner<3, 3>() = so3_left_jacobian(w).transpose();
    maps.push_back(B);
  }
  return se3_kernel_impl(poses, maps, h, weights);
}

double se3_median_bandwidth(const ParticleSet& pose_params, const Vector6& weights) {
  const std::vector<Transform> poses = poses_of(pose_params);
  const auto n = static_cast<Eigen::Index>(poses.size());
  if (n < 2) throw DegenerateInputError("median heuristic needs at least two particles");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Transform inv = poses[i].inverse();
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      dist.push_back(std::sqrt(weighted_screw_norm(se3_log_any(inv * poses[j]), weights)));
    }
  }
  return median_bandwidth_from_distances(std::move(dist), n);
}

Eigen::MatrixXd svgd_direction(const ParticleSet& X, const Eigen::MatrixXd& grad_logp,
                               const KernelEval& ker) {
  const Eigen::Index n = X.size();
  const Eigen::Index d = X.dim();
  if (grad_logp.rows() != n || grad_logp.cols() != d || ker.K.rows() != n ||
      ker.K.cols() != n || static_cast<Eigen::Index>(ker.grad.size()) != n) {
    throw ContractError("svgd_direction: particle, gradient and kernel shapes disagree");
  }
  for (const Eigen::MatrixXd& G : ker.grad) {
    if (G.rows() != n || G.cols() != d) {
      throw ContractError("svgd_direction: kernel gradient shape disagrees");
    }
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      phi.row(i) += ker.K(j, i) * grad_logp.row(j) + ker.gradient(j, i);
    }
  }
  phi /= static_cast<double>(n);
  return phi;
}

double backtracking_line_search(const BatchObjective& objective, const ParticleSet& X,
                                const Eigen::MatrixXd& direction, const StepControl& ctl) {
  ctl.validate();
  if (direction.rows() != X.size() || direction.cols() != X.dim()) {
    throw ContractError("line search direction shape disagrees with particles");
  }
  const double f0 = objective(X.positions());
  if (!std::isfinite(f0)) {
    throw InvalidStateError("line search objective is not finite at the current particles");
  }
  double eps = ctl.eps0;
  for (int k = 0; k <= ctl.max_backtracks; ++k, eps *= ctl.beta) {
    const double trial = objective(X.positions() + eps * direction);
    if (std::isfinite(trial) && trial < f0) return eps;
  }
  return ctl.min_eps;
}

ParticleSet project_box(const ParticleSet& X, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  if (lo.size() != X.dim() || hi.size() != X.dim()) {
    throw ContractError("box bounds must have one entry per dimension");
  }
  if ((lo.array() > hi.array()).any()) {
    throw ParameterError("box lower bound exceeds upper bound");
  }
  Eigen::MatrixXd P = X.positions();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    P.row(i) = P.row(i).cwiseMax(lo.transpose()).cwiseMin(hi.transpose());
  }
  return ParticleSet(std::move(P));
}

}  // namespace csvgd
