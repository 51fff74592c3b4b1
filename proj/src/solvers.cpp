#include "csvgd/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_barrier(const SoftFormulation& F) { return F.kind == FormulationKind::LogBarrier; }

SoftFormulation sized_for(SoftFormulation F, const ConstraintSet& C) {
  if (F.lambda.size() == 0) {
    F.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(C.equalities.size()));
  }
  if (F.gamma.size() == 0) {
    F.gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(C.inequalities.size()));
  }
  F.validate();
  return F;
}

bool strictly_feasible(const ConstraintSet& C, const Eigen::VectorXd& x) {
  for (const ScalarFunction& g : C.inequalities) {
    if (!(g.value(x) < 0.0)) return false;
  }
  return true;
}

Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& x, const ConstraintSet& C) {
  return x.cwiseMax(C.lo).cwiseMin(C.hi);
}

// Draws the initial particles; barrier formulations resample each particle
// until it is strictly inside every inequality.
Eigen::MatrixXd draw_particles(const Problem& P, const SolveConfig& cfg, const ConstraintSet& C,
                               bool strict) {
  if (!P.init_sampler) throw ContractError("problem has no initial sampler");
  std::mt19937_64 rng(cfg.seed);
  Eigen::MatrixXd X(cfg.n_particles, P.dim);
  constexpr int kMaxTries = 100000;
  for (int i = 0; i < cfg.n_particles; ++i) {
    Eigen::VectorXd x = clamp_to_box(P.init_sampler(rng), P.constraints);
    if (x.size() != P.dim) throw ContractError("initial sampler returned the wrong dimension");
    int tries = 1;
    while (strict && !strictly_feasible(C, x)) {
      if (++tries > kMaxTries) {
        throw InvalidStateError("could not draw a strictly feasible initial particle");
      }
      x = clamp_to_box(P.init_sampler(rng), P.constraints);
    }
    X.row(i) = x.transpose();
  }
  return X;
}

struct SweepOutcome {
  double eps = 0.0;
  double mean_step = 0.0;
};

// One SVGD sweep shared by every driver:
//   X <- project(X + eps * (phi + drift))
// with eps from the line search on `objective` (evaluated after projection).
class SweepEngine {
 public:
  SweepEngine(const StepControl& step, bool guard_nonfinite)
      : step_(step), guard_(guard_nonfinite) {}

  template <typename Project>
  SweepOutcome run(ParticleSet& X, const Eigen::MatrixXd& direction, const BatchObjective& objective,
                   const Project& project) const {
    const BatchObjective projected = [&](const Eigen::MatrixXd& Y) { return objective(project(Y)); };
    double eps = step_.eps0;
    if (step_.line_search) eps = backtracking_line_search(projected, X, direction, step_);

    Eigen::MatrixXd Y = project(X.positions() + eps * direction);
    const bool unchecked_step = !step_.line_search || eps == step_.min_eps;
    if (guard_ && unchecked_step && !std::isfinite(objective(Y))) {
      // Never leave the barrier's domain: shrink until finite, else stay put.
      bool ok = false;
      for (int k = 0; k < step_.max_backtracks && !ok; ++k) {
        eps *= step_.beta;
        Y = project(X.positions() + eps * direction);
        ok = std::isfinite(objective(Y));
      }
      if (!ok) {
        Y = X.positions();
        eps = 0.0;
      }
    }
    SweepOutcome out;
    out.eps = eps;
    out.mean_step = (Y - X.positions()).rowwise().norm().mean();
    X.assign(Y);
    return out;
  }

 private:
  StepControl step_;
  bool guard_;
};

Eigen::MatrixXd log_target_grads(const Problem& P, const ParticleSet& X) {
  Eigen::MatrixXd G(X.size(), X.dim());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    G.row(i) = q_log_target_grad(P, X.particle(i)).transpose();
  }
  return G;
}

}  // namespace

void SolveConfig::validate() const {
  if (n_particles < 1) throw ParameterError("n_particles must be at least 1");
  if (!(inner_tol > 0.0) || !(outer_tol > 0.0)) throw ParameterError("tolerances must be positive");
  if (max_inner < 1 || max_outer < 1) throw ParameterError("iteration caps must be positive");
  if (max_total_steps < 0) throw ParameterError("max_total_steps must be nonnegative");
  step.validate();
}

Eigen::MatrixXd initial_particles(const Problem& P, const SolveConfig& cfg) {
  return draw_particles(P, cfg, P.constraints, false);
}

Eigen::VectorXd q_log_target_grad(const Problem& P, const Eigen::VectorXd& x) {
  return -P.alpha * P.grad_f(x);
}

KernelEval problem_kernel(const Problem& P, const ParticleSet& X) {
  if (P.kernel_kind == KernelKind::Se3) {
    const double h = X.size() >= 2 ? se3_median_bandwidth(X, P.se3_weights) : 1.0;
    return se3_kernel(X, h, P.se3_weights);
  }
  const double h = X.size() >= 2 ? median_bandwidth(X) : 1.0;
  return rbf_kernel(X, h);
}

ViolationReport worst_case(const std::vector<ViolationReport>& reports) {
  ViolationReport out;
  if (reports.empty()) return out;
  out.h = reports.front().h;
  out.g = reports.front().g;
  for (const ViolationReport& V : reports) {
    out.max_abs_h = std::max(out.max_abs_h, V.max_abs_h);
    out.max_pos_g = std::max(out.max_pos_g, V.max_pos_g);
    for (Eigen::Index i = 0; i < V.h.size(); ++i) {
      if (std::abs(V.h[i]) > std::abs(out.h[i])) out.h[i] = V.h[i];
    }
    for (Eigen::Index j = 0; j < V.g.size(); ++j) out.g[j] = std::max(out.g[j], V.g[j]);
  }
  return out;
}

// Per constraint, the value of the particle least in violation. Maxima stay
// worst-case so penalty growth still targets the most violating particle.
ViolationReport min_pooled(const std::vector<ViolationReport>& reports) {
  ViolationReport out = worst_case(reports);
  if (reports.empty()) return out;
  out.h = reports.front().h;
  out.g = reports.front().g;
  for (const ViolationReport& V : reports) {
    for (Eigen::Index i = 0; i < V.h.size(); ++i) {
      if (std::abs(V.h[i]) < std::abs(out.h[i])) out.h[i] = V.h[i];
    }
    for (Eigen::Index j = 0; j < V.g.size(); ++j) out.g[j] = std::min(out.g[j], V.g[j]);
  }
  return out;
}

SolveReport solve_q(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const ConstraintSet& C = P.constraints;
  const SoftFormulation base = sized_for(F, C);
  const Eigen::Index n = cfg.n_particles;

  ParticleSet X(draw_particles(P, cfg, C, is_barrier(base)));
  const auto project = [&](const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd Z = Y;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      Z.row(i) = Z.row(i).cwiseMax(C.lo.transpose()).cwiseMin(C.hi.transpose());
    }
    return Z;
  };

  const bool per_particle = cfg.theta_mode == ThetaMode::PerParticle;
  std::vector<SoftFormulation> thetas(per_particle ? static_cast<std::size_t>(n) : 1, base);
  const auto theta = [&](Eigen::Index i) -> const SoftFormulation& {
    return per_particle ? thetas[static_cast<std::size_t>(i)] : thetas.front();
  };

  const BatchObjective objective = [&](const Eigen::MatrixXd& Y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      const Eigen::VectorXd y = Y.row(i).transpose();
      total += P.alpha * P.f(y) + soft_value(theta(i), C, y);
    }
    return total;
  };

  const SweepEngine engine(cfg.step, is_barrier(base));
  SolveReport report;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    bool inner_converged = false;
    bool budget_exhausted = false;
    const long steps_before = report.total_gradient_steps;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      if (cfg.max_total_steps > 0 && report.total_gradient_steps >= cfg.max_total_steps) {
        budget_exhausted = true;
        break;
      }
      if (P.before_sweep) P.before_sweep(report.total_gradient_steps);
      const KernelEval ker = problem_kernel(P, X);
      Eigen::MatrixXd direction = svgd_direction(X, log_target_grads(P, X), ker);
      for (Eigen::Index i = 0; i < n; ++i) {
        direction.row(i) -= soft_grad(theta(i), C, X.particle(i)).transpose();
      }
      const SweepOutcome step = engine.run(X, direction, objective, project);
      ++report.total_gradient_steps;
      if (step.mean_step < cfg.inner_tol) {
        inner_converged = true;
        break;
      }
    }

    std::vector<ViolationReport> reports;
    reports.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) reports.push_back(violation(C, X.particle(i)));
    const ViolationReport worst = worst_case(reports);
    report.feasibility_trace.push_back(worst);
    report.inner_steps.push_back(report.total_gradient_steps - steps_before);
    report.outer_iterations = outer + 1;

    if (worst.worst() < cfg.outer_tol && inner_converged) {
      report.converged = true;
      break;
    }
    if (budget_exhausted) break;
    if (per_particle) {
      for (Eigen::Index i = 0; i < n; ++i) {
        thetas[static_cast<std::size_t>(i)] =
            update_params(thetas[static_cast<std::size_t>(i)], reports[static_cast<std::size_t>(i)],
                          cfg.outer_tol);
      }
    } else {
      thetas.front() = update_params(thetas.front(), worst, cfg.outer_tol);
    }
  }
  report.particles = X;
  report.wall_time = seconds_since(start);
  return report;
}

BoxMapping::BoxMapping(Mapping kind, Eigen::VectorXd lo, Eigen::VectorXd hi)
    : kind_(kind), lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw ContractError("mapping bounds differ in length");
  mapped_.resize(static_cast<std::size_t>(lo_.size()));
  for (Eigen::Index k = 0; k < lo_.size(); ++k) {
    mapped_[static_cast<std::size_t>(k)] =
        kind_ != Mapping::None && std::isfinite(lo_[k]) && std::isfinite(hi_[k]) && lo_[k] < hi_[k];
  }
}

Eigen::VectorXd BoxMapping::apply(const Eigen::VectorXd& u) const {
  Eigen::VectorXd x = u;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (!maps(k)) continue;
    const double lo = lo_[k];
    const double hi = hi_[k];
    double s;
    if (kind_ == Mapping::Tanh) {
      // (tanh(u) + 1) / 2 evaluated as a logistic to keep precision in the tails
      s = 1.0 / (1.0 + std::exp(-2.0 * u[k]));
    } else {
      s = 0.5 * (std::sin(u[k]) + 1.0);
    }
    double v = lo + (hi - lo) * s;
    if (kind_ == Mapping::Tanh) {
      v = std::clamp(v, std::nextafter(lo, hi), std::nextafter(hi, lo));
    }
    x[k] = v;
  }
  return x;
}

Eigen::VectorXd BoxMapping::derivative(const Eigen::VectorXd& u) const {
  Eigen::VectorXd dm = Eigen::VectorXd::Ones(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (!maps(k)) continue;
    const double width = hi_[k] - lo_[k];
    if (kind_ == Mapping::Tanh) {
      const double t = std::tanh(u[k]);
      dm[k] = 0.5 * width * (1.0 - t * t);
    } else {
      dm[k] = 0.5 * width * std::cos(u[k]);
    }
  }
  return dm;
}

Eigen::VectorXd BoxMapping::invert(const Eigen::VectorXd& x) const {
  Eigen::VectorXd u = x;
  constexpr double kEdge = 1e-9;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!maps(k)) continue;
    const double r = std::clamp(2.0 * (x[k] - lo_[k]) / (hi_[k] - lo_[k]) - 1.0, -1.0 + kEdge,
                                1.0 - kEdge);
    u[k] = kind_ == Mapping::Tanh ? std::atanh(r) : std::asin(r);
  }
  return u;
}

ConstraintSet p_constraints(const Problem& P, const SolveConfig& cfg) {
  const BoxMapping m(cfg.mapping, P.constraints.lo, P.constraints.hi);
  ConstraintSet C = P.constraints;
  const std::vector<ScalarFunction> extra =
      bounds_as_inequalities(P.constraints.lo, P.constraints.hi, m.mapped_dims());
  C.inequalities.insert(C.inequalities.end(), extra.begin(), extra.end());
  C.lo = Eigen::VectorXd::Constant(P.dim, -std::numeric_limits<double>::infinity());
  C.hi = Eigen::VectorXd::Constant(P.dim, std::numeric_limits<double>::infinity());
  return C;
}

namespace {

double neg_log_p_hat(const Problem& P, const SoftFormulation& F, const ConstraintSet& C,
                     const BoxMapping& m, const Eigen::VectorXd& u) {
  const Eigen::VectorXd x = m.apply(u);
  return P.alpha * P.f(x) + soft_value(F, C, x);
}

Eigen::VectorXd grad_log_p_hat(const Problem& P, const SoftFormulation& F, const ConstraintSet& C,
                               const BoxMapping& m, const Eigen::VectorXd& u) {
  const Eigen::VectorXd x = m.apply(u);
  const Eigen::VectorXd gx = -(P.alpha * P.grad_f(x) + soft_grad(F, C, x));
  return gx.cwiseProduct(m.derivative(u));
}

}  // namespace

double p_log_target(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg,
                    const Eigen::VectorXd& u) {
  const BoxMapping m(cfg.mapping, P.constraints.lo, P.constraints.hi);
  return -neg_log_p_hat(P, F, p_constraints(P, cfg), m, u);
}

Eigen::VectorXd p_log_target_grad(const Problem& P, const SoftFormulation& F,
                                  const SolveConfig& cfg, const Eigen::VectorXd& u) {
  const BoxMapping m(cfg.mapping, P.constraints.lo, P.constraints.hi);
  return grad_log_p_hat(P, F, p_constraints(P, cfg), m, u);
}

SolveReport solve_p(const Problem& P, const SoftFormulation& F, const SolveConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const BoxMapping m(cfg.mapping, P.constraints.lo, P.constraints.hi);
  const ConstraintSet C = p_constraints(P, cfg);
  SoftFormulation theta = sized_for(F, C);
  const Eigen::Index n = cfg.n_particles;

  const Eigen::MatrixXd X0 = draw_particles(P, cfg, C, is_barrier(theta));
  Eigen::MatrixXd U0(X0.rows(), X0.cols());
  for (Eigen::Index i = 0; i < n; ++i) U0.row(i) = m.invert(X0.row(i).transpose()).transpose();
  ParticleSet U(U0);

  const auto mapped = [&](const ParticleSet& S) {
    Eigen::MatrixXd out(S.size(), S.dim());
    for (Eigen::Index i = 0; i < S.size(); ++i) out.row(i) = m.apply(S.particle(i)).transpose();
    return out;
  };
  const auto identity = [](const Eigen::MatrixXd& Y) { return Y; };
  const BatchObjective objective = [&](const Eigen::MatrixXd& Y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      total += neg_log_p_hat(P, theta, C, m, Y.row(i).transpose());
    }
    return total;
  };

  const SweepEngine engine(cfg.step, is_barrier(theta));
  SolveReport report;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    bool inner_converged = false;
    bool budget_exhausted = false;
    const long steps_before = report.total_gradient_steps;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      if (cfg.max_total_steps > 0 && report.total_gradient_steps >= cfg.max_total_steps) {
        budget_exhausted = true;
        break;
      }
      if (P.before_sweep) P.before_sweep(report.total_gradient_steps);
      Eigen::MatrixXd G(n, P.dim);
      for (Eigen::Index i = 0; i < n; ++i) {
        G.row(i) = grad_log_p_hat(P, theta, C, m, U.particle(i)).transpose();
      }
      const Eigen::MatrixXd direction = svgd_direction(U, G, problem_kernel(P, U));
      const SweepOutcome step = engine.run(U, direction, objective, identity);
      ++report.total_gradient_steps;
      if (step.mean_step < cfg.inner_tol) {
        inner_converged = true;
        break;
      }
    }

    const Eigen::MatrixXd X = mapped(U);
    std::vector<ViolationReport> reports;
    reports.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) reports.push_back(violation(C, X.row(i).transpose()));
    const ViolationReport worst = worst_case(reports);
    report.feasibility_trace.push_back(worst);
    report.inner_steps.push_back(report.total_gradient_steps - steps_before);
    report.outer_iterations = outer + 1;

    if (worst.worst() < cfg.outer_tol && inner_converged) {
      report.converged = true;
      break;
    }
    if (budget_exhausted) break;
    theta = update_params(theta, min_pooled(reports), cfg.outer_tol);
  }
  report.particles = ParticleSet(mapped(U));
  report.wall_time = seconds_since(start);
  return report;
}

SolveReport solve_unconstrained(const Problem& P, const SolveConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  ParticleSet X(initial_particles(P, cfg));
  const auto identity = [](const Eigen::MatrixXd& Y) { return Y; };
  const BatchObjective objective = [&](const Eigen::MatrixXd& Y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) total += P.alpha * P.f(Y.row(i).transpose());
    return total;
  };
  const SweepEngine engine(cfg.step, false);
  SolveReport report;
  bool inner_converged = false;
  for (int inner = 0; inner < cfg.max_inner; ++inner) {
    if (cfg.max_total_steps > 0 && report.total_gradient_steps >= cfg.max_total_steps) break;
    if (P.before_sweep) P.before_sweep(report.total_gradient_steps);
    const Eigen::MatrixXd direction =
        svgd_direction(X, log_target_grads(P, X), problem_kernel(P, X));
    const SweepOutcome step = engine.run(X, direction, objective, identity);
    ++report.total_gradient_steps;
    if (step.mean_step < cfg.inner_tol) {
      inner_converged = true;
      break;
    }
  }
  std::vector<ViolationReport> reports;
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    reports.push_back(violation(P.constraints, X.particle(i)));
  }
  report.feasibility_trace.push_back(worst_case(reports));
  report.inner_steps.push_back(report.total_gradient_steps);
  report.outer_iterations = 1;
  report.converged = inner_converged;
  report.particles = X;
  report.wall_time = seconds_since(start);
  return report;
}

}  // namespace csvgd
