#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "csvgd/particles.hpp"
#include "csvgd/se3.hpp"

namespace csvgd {

/// Kernel matrix and its gradients for one particle set.
///
/// K(i, j) = k(z_i, z_j). gradient(j, i) is ∇_{z_j} k(z_j, z_i), a d-vector.
struct KernelEval {
  Eigen::MatrixXd K;
  /// grad[j].row(i) == gradient(j, i)
  std::vector<Eigen::MatrixXd> grad;

  [[nodiscard]] Eigen::Index size() const { return K.rows(); }
  [[nodiscard]] auto gradient(Eigen::Index j, Eigen::Index i) const {
    return grad[static_cast<std::size_t>(j)].row(i);
  }
};

/// Backtracking schedule: trial steps eps0 * beta^k for k = 0..max_backtracks.
struct StepControl {
  double eps0 = 1e-1;
  double beta = 0.5;
  int max_backtracks = 20;
  double min_eps = 1e-8;
  /// When false every sweep uses eps0 and no objective is evaluated.
  bool line_search = true;

  /// Throws ParameterError unless eps0 > min_eps > 0 and 0 < beta < 1.
  void validate() const;
};

/// RBF bandwidth h = med² / log(n + 1), med the median pairwise distance.
/// Falls back to 1 when every particle coincides.
double median_bandwidth(const ParticleSet& X);

/// Same heuristic over an arbitrary list of pairwise distances.
double median_bandwidth_from_distances(std::vector<double> distances, Eigen::Index n);

/// k(a, b) = exp(-‖a - b‖² / h).
KernelEval rbf_kernel(const ParticleSet& X, double h);

/// k(i, j) = exp(-‖log(T_i⁻¹ T_j)‖²_W / h). Particles are pose parameters
/// [translation; rotation vector]; gradients are taken in those coordinates.
KernelEval se3_kernel(const std::vector<Transform>& poses, double h, const Vector6& weights);
KernelEval se3_kernel(const ParticleSet& pose_params, double h, const Vector6& weights);

/// Median heuristic over weighted screw distances of all pose pairs.
double se3_median_bandwidth(const ParticleSet& pose_params, const Vector6& weights);

/// φ*(x_i) = (1/n) Σ_j [K(j, i) grad_logp_j + ∇_{x_j} k(x_j, x_i)].
Eigen::MatrixXd svgd_direction(const ParticleSet& X, const Eigen::MatrixXd& grad_logp,
                               const KernelEval& ker);

using BatchObjective = std::function<double(const Eigen::MatrixXd&)>;

/// Largest eps0 * beta^k that strictly decreases `objective`, or min_eps.
/// A trial that evaluates to NaN or Inf is rejected like any other failure.
double backtracking_line_search(const BatchObjective& objective, const ParticleSet& X,
                                const Eigen::MatrixXd& direction, const StepControl& ctl);

/// Clamps every coordinate into [lo, hi]. Bounds may be infinite.
ParticleSet project_box(const ParticleSet& X, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi);

}  // namespace csvgd
