#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace csvgd {

/// A scalar function of the decision vector together with its gradient.
struct ScalarFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::string name;
};

/// Equalities h(x) = 0, inequalities g(x) <= 0 and box bounds lo <= x <= hi.
struct ConstraintSet {
  std::vector<ScalarFunction> equalities;
  std::vector<ScalarFunction> inequalities;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  /// No constraints and an infinite box.
  static ConstraintSet unbounded(Eigen::Index dim);

  [[nodiscard]] Eigen::Index dim() const { return lo.size(); }
  [[nodiscard]] bool has_finite_bounds() const;
  [[nodiscard]] bool empty() const { return equalities.empty() && inequalities.empty(); }

  /// Equalities and inequalities of both sets; the box is the intersection.
  [[nodiscard]] ConstraintSet merged_with(const ConstraintSet& other) const;
};

/// Finite bounds turned into inequalities lo_k - x_k <= 0 and x_k - hi_k <= 0.
/// Dimensions where `skip[k]` is true are left out.
std::vector<ScalarFunction> bounds_as_inequalities(const Eigen::VectorXd& lo,
                                                   const Eigen::VectorXd& hi,
                                                   const std::vector<bool>& skip = {});

enum class FormulationKind { QuadraticPenalty, AugmentedLagrangian, LogBarrier, RelaxedLogBarrier };

/// Soft-constraint cost L_θ and its parameters. Only the fields relevant to
/// `kind` are read.
struct SoftFormulation {
  FormulationKind kind = FormulationKind::AugmentedLagrangian;
  Eigen::VectorXd lambda;  // one per equality; empty means all zero
  Eigen::VectorXd gamma;   // one per inequality, >= 0; empty means all zero
  double c = 1.0;          // equality penalty weight
  double d_w = 1.0;        // inequality penalty weight
  double mu = 1.0;         // barrier weight
  double delta = 0.1;      // relaxed-barrier threshold
  double growth = 10.0;    // rho
  double shrink = 0.5;     // sigma

  // Worst violations seen at the previous outer iteration (AL growth rule).
  double last_eq_violation = std::numeric_limits<double>::infinity();
  double last_ineq_violation = std::numeric_limits<double>::infinity();

  static SoftFormulation quadratic_penalty(double c, double d_w);
  static SoftFormulation augmented_lagrangian(double c, double d_w);
  static SoftFormulation log_barrier(double mu);
  static SoftFormulation relaxed_log_barrier(double mu, double delta);

  /// Throws ParameterError on negative weights, gamma < 0 or bad growth/shrink.
  void validate() const;
};

struct ViolationReport {
  double max_abs_h = 0.0;
  double max_pos_g = 0.0;
  Eigen::VectorXd h;
  Eigen::VectorXd g;

  [[nodiscard]] double worst() const { return max_abs_h > max_pos_g ? max_abs_h : max_pos_g; }
};

/// Relaxed barrier D(g): -log(-g) for g <= -delta, quadratic extension beyond.
double relaxed_barrier(double g, double delta);
double relaxed_barrier_derivative(double g, double delta);

double soft_value(const SoftFormulation& F, const ConstraintSet& C, const Eigen::VectorXd& x);
Eigen::VectorXd soft_grad(const SoftFormulation& F, const ConstraintSet& C,
                          const Eigen::VectorXd& x);

/// Outer-loop parameter update. Multipliers use the raw values in V.h / V.g;
/// penalty growth uses V.max_abs_h / V.max_pos_g against `tol`.
SoftFormulation update_params(const SoftFormulation& F, const ViolationReport& V,
                              double tol = 1e-3);

ViolationReport violation(const ConstraintSet& C, const Eigen::VectorXd& x);

}  // namespace csvgd
