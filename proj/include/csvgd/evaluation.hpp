#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "csvgd/constraints.hpp"
#include "csvgd/solvers.hpp"

namespace csvgd {

struct GroundTruthSet {
  Eigen::MatrixXd samples;
  std::uint64_t seed = 0;
};

struct RejectionOptions {
  /// Proposals used to estimate the minimum of f over the feasible set.
  long scan_samples = 100000;
  /// Proposal budget before giving up.
  long max_proposals = 10000000;
  /// Minimum acceptance rate over the budget.
  double min_acceptance = 1e-6;
};

/// Exact draws from exp(-alpha f) restricted to the inequality-feasible part
/// of the (finite) box. Equality constraints are not supported.
GroundTruthSet rejection_sample(const Problem& P, long m, std::uint64_t seed,
                                const RejectionOptions& opts = {});

/// Minimum-cost assignment for a square cost matrix (Hungarian method with
/// potentials). Returns assignment[row] = column.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost);

using PointDistance = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Exact earth mover distance between equal-size point sets:
/// min over permutations π of (1/m) Σ dist(A_i, B_π(i)). Euclidean by default.
double emd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const PointDistance& dist = {});

/// Weighted screw distance between pose parameter vectors.
PointDistance se3_point_distance(const Vector6& weights);

/// max over points of ‖grad(x) - fd(x)‖ / max(1, ‖fd(x)‖), central differences.
double grad_check(const std::function<double(const Eigen::VectorXd&)>& value,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                  const std::vector<Eigen::VectorXd>& points, double step = 1e-6);

enum class Method { Q, P, Unconstrained };

std::string to_string(Method m);
std::string to_string(FormulationKind k);
Method method_from_string(const std::string& s);
FormulationKind formulation_from_string(const std::string& s);

struct MetricsRecord {
  std::string problem;
  std::optional<double> emd;
  long total_gradient_steps = 0;
  int outer_iterations = 0;
  double max_abs_h = 0.0;
  double max_pos_g = 0.0;
  bool converged = false;
  int n_particles = 0;
  Method method = Method::Q;
  FormulationKind formulation = FormulationKind::AugmentedLagrangian;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

/// One cell of a trial matrix. The factory builds a fresh problem per trial so
/// stateful problems never share state across threads.
struct TrialSpec {
  std::string problem_name;
  std::function<Problem()> make_problem;
  Method method = Method::Q;
  SoftFormulation formulation;
  SolveConfig config;
  /// Ground truth for the EMD column; empty means emd = null.
  std::optional<Eigen::MatrixXd> ground_truth;
  PointDistance distance;
};

/// Runs one solve with the method's driver.
SolveReport run_method(const Problem& P, Method method, const SoftFormulation& F,
                       const SolveConfig& cfg);

MetricsRecord run_trial(const TrialSpec& trial, SolveReport* report_out = nullptr);

/// Runs every cell on up to `threads` workers (0 = hardware concurrency).
/// Records come back in input order; nonconvergence is recorded, not raised.
std::vector<MetricsRecord> trial_matrix(const std::vector<TrialSpec>& trials, unsigned threads = 0);

/// EMD of particles against ground truth, subsampling whichever set is larger
/// with a seeded shuffle so both sides have the same count.
double emd_to_ground_truth(const Eigen::MatrixXd& particles, const Eigen::MatrixXd& truth,
                           const PointDistance& dist = {}, std::uint64_t seed = 0);

}  // namespace csvgd
