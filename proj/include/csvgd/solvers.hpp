#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "csvgd/constraints.hpp"
#include "csvgd/particles.hpp"
#include "csvgd/se3.hpp"
#include "csvgd/svgd.hpp"

namespace csvgd {

enum class KernelKind { EuclideanRbf, Se3 };

/// Target p(x) ∝ exp(-alpha f(x)) restricted to the feasible set of `constraints`.
struct Problem {
  std::string name;
  Eigen::Index dim = 0;
  std::function<double(const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_f;
  double alpha = 1.0;
  ConstraintSet constraints;
  KernelKind kernel_kind = KernelKind::EuclideanRbf;
  /// Diagonal screw weights for the SE(3) kernel.
  Vector6 se3_weights = Vector6::Ones();
  /// Draws one initial particle.
  std::function<Eigen::VectorXd(std::mt19937_64&)> init_sampler;
  /// Called by the solvers before every particle-update sweep with the sweep
  /// index. Problems with stochastic costs refresh their samples here.
  std::function<void(long)> before_sweep;
};

enum class ThetaMode { PerParticle, Shared };
enum class Mapping { None, Tanh, Sin };

struct SolveConfig {
  int n_particles = 50;
  /// Inner loop stops once the mean per-particle update norm drops below this.
  double inner_tol = 1e-5;
  /// Outer loop stops once every particle violates every constraint by less.
  double outer_tol = 1e-3;
  int max_inner = 2000;
  int max_outer = 20;
  /// Hard cap on total sweeps over all outer iterations; 0 disables it.
  long max_total_steps = 0;
  StepControl step;
  std::uint64_t seed = 0;
  ThetaMode theta_mode = ThetaMode::PerParticle;
  Mapping mapping = Mapping::Tanh;

  void validate() const;
};

struct SolveReport {
  ParticleSet particles{Eigen::MatrixXd::Zero(1, 1)};
  long total_gradient_steps = 0;
  int outer_iterations = 0;
  /// Worst-case violation over particles after each outer iteration.
  std::vector<ViolationReport> feasibility_trace;
  /// Inner sweeps spent in each outer iteration.
  std::vector<long> inner_steps;
  bool converged = false;
  double wall_time = 0.0;
};

/// Initial particle matrix drawn from the problem's sampler with cfg.seed.
Eigen::MatrixXd initial_particles(const Problem& P, const SolveConfig& cfg);

/// ∇ log p(x) = -alpha ∇f(x), without any constraint term.
Eigen::VectorXd q_log_target_grad(const Problem& P, const Eigen::VectorXd& x);

/// Per constraint, the value of the most violating particle, plus the maxima.
ViolationReport worst_case(const std::vector<ViolationReport>& reports);

/// Per constraint, the value of the particle least in violation (the p-method
/// multiplier input). max_abs_h / max_pos_g stay worst-case.
ViolationReport min_pooled(const std::vector<ViolationReport>& reports);

/// Q-method: constraint gradients are added per particle outside the kernel
/// average, then the particle is projected into the box.
SolveReport solve_q(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg);

/// Box mapping m of the p-method. Dimensions with a finite lower and upper
/// bound are squashed into the box; others pass through unchanged.
class BoxMapping {
 public:
  BoxMapping(Mapping kind, Eigen::VectorXd lo, Eigen::VectorXd hi);

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  /// Diagonal of dm/du.
  [[nodiscard]] Eigen::VectorXd derivative(const Eigen::VectorXd& u) const;
  /// A preimage of x (clamped just inside the box when x lies on its boundary).
  [[nodiscard]] Eigen::VectorXd invert(const Eigen::VectorXd& x) const;
  [[nodiscard]] bool maps(Eigen::Index k) const { return mapped_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const std::vector<bool>& mapped_dims() const { return mapped_; }

 private:
  Mapping kind_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  std::vector<bool> mapped_;
};

/// Constraints seen by the p-method: the problem's constraints plus every
/// finite bound the mapping does not enforce.
ConstraintSet p_constraints(const Problem& P, const SolveConfig& cfg);

/// log p̂(u) + log Z = -alpha f(m(u)) - L_θ(m(u)).
double p_log_target(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg,
                    const Eigen::VectorXd& u);
Eigen::VectorXd p_log_target_grad(const Problem& P, const SoftFormulation& F,
                                  const SolveConfig& cfg, const Eigen::VectorXd& u);

/// p-method: constraints folded into the target and shared through the
/// kernel. Reported particles are mapped back into the box.
SolveReport solve_p(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg);

/// Plain SVGD on exp(-alpha f), ignoring constraints and bounds.
SolveReport solve_unconstrained(const Problem& P, const SolveConfig& cfg);

/// Kernel evaluation for the problem's kernel kind with the median heuristic.
KernelEval problem_kernel(const Problem& P, const ParticleSet& X);

}  // namespace csvgd
