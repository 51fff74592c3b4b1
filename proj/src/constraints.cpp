#include "csvgd/constraints.hpp"

#include <algorithm>
#include <cmath>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double multiplier(const Eigen::VectorXd& v, std::size_t i, std::size_t count, const char* what) {
  if (v.size() == 0) return 0.0;
  if (static_cast<std::size_t>(v.size()) != count) {
    throw ContractError(std::string(what) + " count does not match the constraint count");
  }
  return v[static_cast<Eigen::Index>(i)];
}

Eigen::VectorXd sized(const Eigen::VectorXd& v, std::size_t count) {
  if (v.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count));
  return v;
}

}  // namespace

ConstraintSet ConstraintSet::unbounded(Eigen::Index dim) {
  ConstraintSet C;
  C.lo = Eigen::VectorXd::Constant(dim, -kInf);
  C.hi = Eigen::VectorXd::Constant(dim, kInf);
  return C;
}

bool ConstraintSet::has_finite_bounds() const {
  return lo.array().isFinite().any() || hi.array().isFinite().any();
}

ConstraintSet ConstraintSet::merged_with(const ConstraintSet& other) const {
  if (other.dim() != dim()) throw ContractError("cannot merge constraint sets of different dimension");
  ConstraintSet out = *this;
  out.equalities.insert(out.equalities.end(), other.equalities.begin(), other.equalities.end());
  out.inequalities.insert(out.inequalities.end(), other.inequalities.begin(),
                          other.inequalities.end());
  out.lo = lo.cwiseMax(other.lo);
  out.hi = hi.cwiseMin(other.hi);
  return out;
}

std::vector<ScalarFunction> bounds_as_inequalities(const Eigen::VectorXd& lo,
                                                   const Eigen::VectorXd& hi,
                                                   const std::vector<bool>& skip) {
  std::vector<ScalarFunction> out;
  const Eigen::Index d = lo.size();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!skip.empty() && skip[static_cast<std::size_t>(k)]) continue;
    if (std::isfinite(lo[k])) {
      const double bound = lo[k];
      out.push_back({[k, bound](const Eigen::VectorXd& x) { return bound - x[k]; },
                     [k, d](const Eigen::VectorXd&) {
                       Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
                       g[k] = -1.0;
                       return g;
                     },
                     "lower_bound_" + std::to_string(k)});
    }
    if (std::isfinite(hi[k])) {
      const double bound = hi[k];
      out.push_back({[k, bound](const Eigen::VectorXd& x) { return x[k] - bound; },
                     [k, d](const Eigen::VectorXd&) {
                       Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
                       g[k] = 1.0;
                       return g;
                     },
                     "upper_bound_" + std::to_string(k)});
    }
  }
  return out;
}

SoftFormulation SoftFormulation::quadratic_penalty(double c, double d_w) {
  SoftFormulation F;
  F.kind = FormulationKind::QuadraticPenalty;
  F.c = c;
  F.d_w = d_w;
  return F;
}

SoftFormulation SoftFormulation::augmented_lagrangian(double c, double d_w) {
  SoftFormulation F;
  F.kind = FormulationKind::AugmentedLagrangian;
  F.c = c;
  F.d_w = d_w;
  return F;
}

SoftFormulation SoftFormulation::log_barrier(double mu) {
  SoftFormulation F;
  F.kind = FormulationKind::LogBarrier;
  F.mu = mu;
  return F;
}

SoftFormulation SoftFormulation::relaxed_log_barrier(double mu, double delta) {
  SoftFormulation F;
  F.kind = FormulationKind::RelaxedLogBarrier;
  F.mu = mu;
  F.delta = delta;
  return F;
}

void SoftFormulation::validate() const {
  if (c < 0.0 || d_w < 0.0 || mu < 0.0) {
    throw ParameterError("formulation weights must be nonnegative");
  }
  if ((kind == FormulationKind::LogBarrier || kind == FormulationKind::RelaxedLogBarrier) &&
      !(mu > 0.0)) {
    throw ParameterError("barrier weight mu must be positive");
  }
  if (kind == FormulationKind::RelaxedLogBarrier && !(delta > 0.0)) {
    throw ParameterError("relaxed barrier threshold delta must be positive");
  }
  if (gamma.size() > 0 && (gamma.array() < 0.0).any()) {
    throw ParameterError("inequality multipliers must be nonnegative");
  }
  if (!(growth > 1.0)) throw ParameterError("growth factor must exceed 1");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ParameterError("shrink factor must lie in (0, 1)");
}

double relaxed_barrier(double g, double delta) {
  if (g <= -delta) return -std::log(-g);
  const double r = (g + 2.0 * delta) / delta;
  return 0.5 * (r * r - 1.0) - std::log(delta);
}

double relaxed_barrier_derivative(double g, double delta) {
  if (g <= -delta) return -1.0 / g;
  return (g + 2.0 * delta) / (delta * delta);
}

double soft_value(const SoftFormulation& F, const ConstraintSet& C, const Eigen::VectorXd& x) {
  const std::size_t ne = C.equalities.size();
  const std::size_t ni = C.inequalities.size();
  double total = 0.0;
  switch (F.kind) {
    case FormulationKind::QuadraticPenalty:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        total += F.c * h * h;
      }
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = std::max(0.0, C.inequalities[j].value(x));
        total += F.d_w * g * g;
      }
      return total;
    case FormulationKind::AugmentedLagrangian:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        total += multiplier(F.lambda, i, ne, "lambda") * h + F.c * h * h;
      }
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        const double gamma = multiplier(F.gamma, j, ni, "gamma");
        total += gamma * g;
        if (g > 0.0 || gamma > 0.0) total += F.d_w * g * g;
      }
      return total;
    case FormulationKind::LogBarrier:
      if (ne > 0) throw UnsupportedError("log barrier cannot express equality constraints");
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        if (!(g < 0.0)) return kInf;
        total -= F.mu * std::log(-g);
      }
      return total;
    case FormulationKind::RelaxedLogBarrier:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        total += F.c * h * h;
      }
      for (std::size_t j = 0; j < ni; ++j) {
        total += F.mu * relaxed_barrier(C.inequalities[j].value(x), F.delta);
      }
      return total;
  }
  return total;
}

Eigen::VectorXd soft_grad(const SoftFormulation& F, const ConstraintSet& C,
                          const Eigen::VectorXd& x) {
  const std::size_t ne = C.equalities.size();
  const std::size_t ni = C.inequalities.size();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
  switch (F.kind) {
    case FormulationKind::QuadraticPenalty:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        if (h != 0.0) grad += (2.0 * F.c * h) * C.equalities[i].gradient(x);
      }
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        if (g > 0.0) grad += (2.0 * F.d_w * g) * C.inequalities[j].gradient(x);
      }
      return grad;
    case FormulationKind::AugmentedLagrangian:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        const double coeff = multiplier(F.lambda, i, ne, "lambda") + 2.0 * F.c * h;
        if (coeff != 0.0) grad += coeff * C.equalities[i].gradient(x);
      }
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        const double gamma = multiplier(F.gamma, j, ni, "gamma");
        double coeff = gamma;
        if (g > 0.0 || gamma > 0.0) coeff += 2.0 * F.d_w * g;
        if (coeff != 0.0) grad += coeff * C.inequalities[j].gradient(x);
      }
      return grad;
    case FormulationKind::LogBarrier:
      if (ne > 0) throw UnsupportedError("log barrier cannot express equality constraints");
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        if (!(g < 0.0)) throw BarrierDomainError("log barrier gradient at an infeasible point");
        grad += (-F.mu / g) * C.inequalities[j].gradient(x);
      }
      return grad;
    case FormulationKind::RelaxedLogBarrier:
      for (std::size_t i = 0; i < ne; ++i) {
        const double h = C.equalities[i].value(x);
        if (h != 0.0) grad += (2.0 * F.c * h) * C.equalities[i].gradient(x);
      }
      for (std::size_t j = 0; j < ni; ++j) {
        const double g = C.inequalities[j].value(x);
        grad += (F.mu * relaxed_barrier_derivative(g, F.delta)) * C.inequalities[j].gradient(x);
      }
      return grad;
  }
  return grad;
}

SoftFormulation update_params(const SoftFormulation& F, const ViolationReport& V, double tol) {
  SoftFormulation out = F;
  switch (F.kind) {
    case FormulationKind::QuadraticPenalty:
      if (V.max_abs_h > tol) out.c *= F.growth;
      if (V.max_pos_g > tol) out.d_w *= F.growth;
      break;
    case FormulationKind::AugmentedLagrangian: {
      const auto ne = static_cast<std::size_t>(V.h.size());
      const auto ni = static_cast<std::size_t>(V.g.size());
      out.lambda = sized(F.lambda, ne);
      out.gamma = sized(F.gamma, ni);
      if (static_cast<std::size_t>(out.lambda.size()) != ne ||
          static_cast<std::size_t>(out.gamma.size()) != ni) {
        throw ContractError("multiplier counts do not match the violation report");
      }
      out.lambda += 2.0 * F.c * V.h;
      out.gamma = (out.gamma + 2.0 * F.d_w * V.g).cwiseMax(0.0);
      if (V.max_abs_h > tol && V.max_abs_h > 0.25 * F.last_eq_violation) out.c *= F.growth;
      if (V.max_pos_g > tol && V.max_pos_g > 0.25 * F.last_ineq_violation) out.d_w *= F.growth;
      out.last_eq_violation = V.max_abs_h;
      out.last_ineq_violation = V.max_pos_g;
      break;
    }
    case FormulationKind::LogBarrier:
      out.mu *= F.shrink;
      break;
    case FormulationKind::RelaxedLogBarrier:
      out.mu *= F.shrink;
      out.delta *= F.shrink;
      if (V.max_abs_h > tol) out.c *= F.growth;
      break;
  }
  return out;
}

ViolationReport violation(const ConstraintSet& C, const Eigen::VectorXd& x) {
  ViolationReport V;
  V.h.resize(static_cast<Eigen::Index>(C.equalities.size()));
  V.g.resize(static_cast<Eigen::Index>(C.inequalities.size()));
  for (std::size_t i = 0; i < C.equalities.size(); ++i) {
    const double h = C.equalities[i].value(x);
    V.h[static_cast<Eigen::Index>(i)] = h;
    V.max_abs_h = std::max(V.max_abs_h, std::abs(h));
  }
  for (std::size_t j = 0; j < C.inequalities.size(); ++j) {
    const double g = C.inequalities[j].value(x);
    V.g[static_cast<Eigen::Index>(j)] = g;
    V.max_pos_g = std::max(V.max_pos_g, g);
  }
  return V;
}

}  // namespace csvgd
