#include "csvgd/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "csvgd/errors.hpp"

namespace csvgd {

GroundTruthSet rejection_sample(const Problem& P, long m, std::uint64_t seed,
                                const RejectionOptions& opts) {
  const ConstraintSet& C = P.constraints;
  if (!C.lo.allFinite() || !C.hi.allFinite()) {
    throw ParameterError("rejection sampling needs a finite box");
  }
  if (!C.equalities.empty()) {
    throw UnsupportedError("rejection sampling cannot hit equality constraints");
  }
  if (m < 1) throw ParameterError("rejection sampling needs m >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd width = C.hi - C.lo;
  const auto propose = [&] {
    Eigen::VectorXd x(P.dim);
    for (Eigen::Index k = 0; k < P.dim; ++k) x[k] = C.lo[k] + width[k] * unit(rng);
    return x;
  };
  const auto feasible = [&](const Eigen::VectorXd& x) {
    for (const ScalarFunction& g : C.inequalities) {
      if (g.value(x) > 0.0) return false;
    }
    return true;
  };

  double f_min = std::numeric_limits<double>::infinity();
  for (long s = 0; s < opts.scan_samples; ++s) {
    const Eigen::VectorXd x = propose();
    if (feasible(x)) f_min = std::min(f_min, P.f(x));
  }
  if (!std::isfinite(f_min)) {
    throw InfeasibleTargetError("no feasible proposal found while scanning for min f");
  }

  GroundTruthSet out;
  out.seed = seed;
  out.samples.resize(m, P.dim);
  long accepted = 0;
  long proposals = 0;
  while (accepted < m) {
    const Eigen::VectorXd x = propose();
    ++proposals;
    if (feasible(x)) {
      const double accept = std::exp(-P.alpha * (P.f(x) - f_min));
      if (unit(rng) < accept) out.samples.row(accepted++) = x.transpose();
    }
    if (proposals >= opts.max_proposals &&
        static_cast<double>(accepted) / static_cast<double>(proposals) < opts.min_acceptance) {
      throw InfeasibleTargetError("rejection sampler acceptance rate is too low");
    }
  }
  return out;
}

std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw ContractError("assignment needs a square cost matrix");
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto N = static_cast<std::size_t>(n);
  // 1-based potentials; column 0 is the virtual start column
  std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0);
  std::vector<std::size_t> p(N + 1, 0), way(N + 1, 0);
  for (std::size_t i = 1; i <= N; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(N + 1, kInf);
    std::vector<char> used(N + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= N; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= N; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> assignment(N, 0);
  for (std::size_t j = 1; j <= N; ++j) {
    assignment[p[j] - 1] = static_cast<Eigen::Index>(j - 1);
  }
  return assignment;
}

double emd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const PointDistance& dist) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ContractError("emd needs point sets of equal count and dimension");
  }
  const Eigen::Index m = A.rows();
  if (m == 0) return 0.0;
  Eigen::MatrixXd cost(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      cost(i, j) = dist ? dist(A.row(i).transpose(), B.row(j).transpose())
                        : (A.row(i) - B.row(j)).norm();
    }
  }
  const std::vector<Eigen::Index> assignment = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) total += cost(i, assignment[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(m);
}

PointDistance se3_point_distance(const Vector6& weights) {
  return [weights](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Transform rel = pose_from_params(a).inverse() * pose_from_params(b);
    return std::sqrt(weighted_screw_norm(se3_log_any(rel), weights));
  };
}

double grad_check(const std::function<double(const Eigen::VectorXd&)>& value,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                  const std::vector<Eigen::VectorXd>& points, double step) {
  double worst = 0.0;
  for (const Eigen::VectorXd& x : points) {
    Eigen::VectorXd fd(x.size());
    Eigen::VectorXd y = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      y[k] = x[k] + step;
      const double up = value(y);
      y[k] = x[k] - step;
      const double down = value(y);
      y[k] = x[k];
      fd[k] = (up - down) / (2.0 * step);
    }
    const double err = (grad(x) - fd).norm() / std::max(1.0, fd.norm());
    worst = std::max(worst, err);
  }
  return worst;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Q:
      return "q";
    case Method::P:
      return "p";
    case Method::Unconstrained:
      return "unconstrained";
  }
  return "?";
}

std::string to_string(FormulationKind k) {
  switch (k) {
    case FormulationKind::AugmentedLagrangian:
      return "auglag";
    case FormulationKind::QuadraticPenalty:
      return "quadpenalty";
    case FormulationKind::LogBarrier:
      return "logbarrier";
    case FormulationKind::RelaxedLogBarrier:
      return "relaxedlogbarrier";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "q") return Method::Q;
  if (s == "p") return Method::P;
  if (s == "unconstrained") return Method::Unconstrained;
  throw ParameterError("unknown method '" + s + "'");
}

FormulationKind formulation_from_string(const std::string& s) {
  if (s == "auglag") return FormulationKind::AugmentedLagrangian;
  if (s == "quadpenalty") return FormulationKind::QuadraticPenalty;
  if (s == "logbarrier") return FormulationKind::LogBarrier;
  if (s == "relaxedlogbarrier") return FormulationKind::RelaxedLogBarrier;
  throw ParameterError("unknown formulation '" + s + "'");
}

SolveReport run_method(const Problem& P, Method method, const SoftFormulation& F,
                       const SolveConfig& cfg) {
  switch (method) {
    case Method::Q:
      return solve_q(P, F, cfg);
    case Method::P:
      return solve_p(P, F, cfg);
    case Method::Unconstrained:
      return solve_unconstrained(P, cfg);
  }
  throw ParameterError("unknown method");
}

double emd_to_ground_truth(const Eigen::MatrixXd& particles, const Eigen::MatrixXd& truth,
                           const PointDistance& dist, std::uint64_t seed) {
  if (particles.cols() != truth.cols()) throw ContractError("emd dimension mismatch");
  const Eigen::Index m = std::min(particles.rows(), truth.rows());
  const auto subsample = [&](const Eigen::MatrixXd& X) {
    if (X.rows() == m) return X;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::MatrixXd out(m, X.cols());
    for (Eigen::Index i = 0; i < m; ++i) out.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    return out;
  };
  return emd(subsample(particles), subsample(truth), dist);
}

MetricsRecord run_trial(const TrialSpec& trial, SolveReport* report_out) {
  const Problem P = trial.make_problem();
  SolveReport report = run_method(P, trial.method, trial.formulation, trial.config);
  MetricsRecord rec;
  rec.problem = trial.problem_name;
  rec.total_gradient_steps = report.total_gradient_steps;
  rec.outer_iterations = report.outer_iterations;
  if (!report.feasibility_trace.empty()) {
    rec.max_abs_h = report.feasibility_trace.back().max_abs_h;
    rec.max_pos_g = report.feasibility_trace.back().max_pos_g;
  }
  rec.converged = report.converged;
  rec.n_particles = trial.config.n_particles;
  rec.method = trial.method;
  rec.formulation = trial.formulation.kind;
  rec.seed = trial.config.seed;
  rec.wall_time = report.wall_time;
  if (trial.ground_truth) {
    rec.emd = emd_to_ground_truth(report.particles.positions(), *trial.ground_truth,
                                  trial.distance, trial.config.seed);
  }
  if (report_out) *report_out = std::move(report);
  return rec;
}

std::vector<MetricsRecord> trial_matrix(const std::vector<TrialSpec>& trials, unsigned threads) {
  std::vector<MetricsRecord> records(trials.size());
  if (trials.empty()) return records;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(trials.size()));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(trials.size());
  const auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      try {
        records[i] = run_trial(trials[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

}  // namespace csvgd
