#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "csvgd/errors.hpp"
#include "csvgd/svgd.hpp"

using namespace csvgd;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd M(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) M(i, k) = nd(rng);
  return M;
}

double rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double h) {
  return std::exp(-(a - b).squaredNorm() / h);
}

}  // namespace

TEST_CASE("median bandwidth of two points") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 2, 0;
  CHECK(median_bandwidth(ParticleSet(X)) == doctest::Approx(4.0 / std::log(3.0)).epsilon(1e-12));
  CHECK(median_bandwidth(ParticleSet(X)) == doctest::Approx(3.641).epsilon(1e-3));
}

TEST_CASE("median bandwidth falls back to one for coincident particles") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(4, 3, 0.7);
  CHECK(median_bandwidth(ParticleSet(X)) == 1.0);
}

TEST_CASE("median bandwidth needs two particles") {
  CHECK_THROWS_AS(median_bandwidth(ParticleSet(Eigen::MatrixXd::Zero(1, 2))), DegenerateInputError);
}

TEST_CASE("median bandwidth matches brute force median over all pairs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 5;
    const Eigen::MatrixXd X = random_matrix(n, 3, seed);
    std::vector<double> dists;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((X.row(i) - X.row(j)).norm());
    REQUIRE(dists.size() == 10);
    std::sort(dists.begin(), dists.end());
    const double med = 0.5 * (dists[4] + dists[5]);
    CHECK(median_bandwidth(ParticleSet(X)) ==
          doctest::Approx(med * med / std::log(6.0)).epsilon(1e-12));
  }
}

TEST_CASE("rbf kernel values") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 1, 0;
  const KernelEval ker = rbf_kernel(ParticleSet(X), 1.0);
  CHECK(ker.K(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(ker.K(0, 1) == doctest::Approx(0.3679).epsilon(1e-4));
  CHECK(ker.K(0, 0) == 1.0);
  CHECK(ker.gradient(0, 0).norm() == 0.0);
  CHECK(ker.gradient(1, 1).norm() == 0.0);
}

TEST_CASE("rbf kernel rejects nonpositive bandwidth") {
  const ParticleSet X(random_matrix(3, 2, 1));
  CHECK_THROWS_AS(rbf_kernel(X, 0.0), ParameterError);
  CHECK_THROWS_AS(rbf_kernel(X, -1.0), ParameterError);
}

TEST_CASE("rbf kernel is symmetric, unit diagonal and PSD") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ParticleSet X(random_matrix(8, 3, seed));
    const KernelEval ker = rbf_kernel(X, median_bandwidth(X));
    CHECK((ker.K - ker.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(ker.K(i, i) == 1.0);
    CHECK(ker.K.minCoeff() > 0.0);
    CHECK(ker.K.maxCoeff() <= 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ker.K);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("rbf kernel gradients match central differences") {
  const double step = 1e-6;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::MatrixXd X = random_matrix(4, 3, seed);
    const double h = 1.5;
    const KernelEval ker = rbf_kernel(ParticleSet(X), h);
    for (Eigen::Index j = 0; j < 4; ++j) {
      for (Eigen::Index i = 0; i < 4; ++i) {
        Eigen::VectorXd fd(3);
        for (Eigen::Index k = 0; k < 3; ++k) {
          Eigen::VectorXd up = X.row(j).transpose(), down = up;
          up[k] += step;
          down[k] -= step;
          // when i == j both arguments move together and the kernel is constant
          const Eigen::VectorXd xi = X.row(i).transpose();
          fd[k] = (rbf(up, i == j ? up : xi, h) - rbf(down, i == j ? down : xi, h)) / (2 * step);
        }
        const Eigen::VectorXd an = ker.gradient(j, i).transpose();
        CHECK((an - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
      }
    }
  }
}

TEST_CASE("se3 kernel examples") {
  const Vector6 W = Vector6::Ones();
  const Transform A = se3_exp((Screw() << 0.1, 0.2, 0.3, 0.0, 0.1, 0.2).finished());
  SUBCASE("identical poses") {
    const KernelEval ker = se3_kernel(std::vector<Transform>{A, A}, 1.0, W);
    CHECK(ker.K(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("rotation by pi about z") {
    Transform B = Transform::identity();
    B.R = so3_exp(Eigen::Vector3d(0, 0, std::numbers::pi));
    const KernelEval ker = se3_kernel(std::vector<Transform>{Transform::identity(), B}, 1.0, W);
    CHECK(ker.K(0, 1) == doctest::Approx(std::exp(-std::numbers::pi * std::numbers::pi)).epsilon(1e-9));
  }
  SUBCASE("left composition invariance") {
    const Transform B = se3_exp((Screw() << -0.3, 0.1, 0.0, 0.4, -0.2, 0.9).finished());
    const Transform G = se3_exp((Screw() << 1.0, -2.0, 0.5, 0.3, 0.7, -1.1).finished());
    const Vector6 Wd = (Vector6() << 1, 2, 3, 0.5, 0.5, 4).finished();
    const KernelEval k1 = se3_kernel(std::vector<Transform>{A, B}, 0.7, Wd);
    const KernelEval k2 = se3_kernel(std::vector<Transform>{G * A, G * B}, 0.7, Wd);
    CHECK(k1.K(0, 1) == doctest::Approx(k2.K(0, 1)).epsilon(1e-10));
  }
  SUBCASE("invalid rotation rejected") {
    Transform bad;
    bad.R(0, 0) = 2.0;
    CHECK_THROWS_AS(se3_kernel(std::vector<Transform>{A, bad}, 1.0, W), GeometryError);
  }
}

TEST_CASE("se3 kernel gradients match central differences") {
  const Vector6 W = (Vector6() << 1, 1, 1, 0.5, 0.5, 2).finished();
  const double h = 0.8;
  const double step = 1e-6;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::MatrixXd P = random_matrix(3, 6, seed, 0.6);
    const KernelEval ker = se3_kernel(ParticleSet(P), h, W);
    const auto kval = [&](const Vector6& a, const Vector6& b) {
      const Transform rel = pose_from_params(a).inverse() * pose_from_params(b);
      return std::exp(-weighted_screw_norm(se3_log_any(rel), W) / h);
    };
    for (Eigen::Index j = 0; j < 3; ++j) {
      for (Eigen::Index i = 0; i < 3; ++i) {
        if (i == j) continue;
        Vector6 fd;
        for (int k = 0; k < 6; ++k) {
          Vector6 up = P.row(j).transpose(), down = up;
          up[k] += step;
          down[k] -= step;
          const Vector6 xi = P.row(i).transpose();
          fd[k] = (kval(up, xi) - kval(down, xi)) / (2 * step);
        }
        const Vector6 an = ker.gradient(j, i).transpose();
        CHECK((an - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
      }
    }
  }
}

TEST_CASE("svgd direction single particle is the score") {
  const Eigen::MatrixXd X = random_matrix(1, 3, 4);
  const Eigen::MatrixXd g = random_matrix(1, 3, 5);
  const KernelEval ker = rbf_kernel(ParticleSet(X), 1.0);
  CHECK((svgd_direction(ParticleSet(X), g, ker) - g).norm() == 0.0);
}

TEST_CASE("svgd direction vanishes for coincident particles without score") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Constant(2, 2, 0.3);
  const KernelEval ker = rbf_kernel(ParticleSet(X), 1.0);
  CHECK(svgd_direction(ParticleSet(X), Eigen::MatrixXd::Zero(2, 2), ker).norm() == 0.0);
}

TEST_CASE("svgd direction matches a brute force double loop") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd X = random_matrix(3, 2, seed);
    const Eigen::MatrixXd g = random_matrix(3, 2, seed + 100);
    const double h = 0.9;
    const Eigen::MatrixXd phi = svgd_direction(ParticleSet(X), g, rbf_kernel(ParticleSet(X), h));
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (int j = 0; j < 3; ++j) {
        const Eigen::Vector2d xi = X.row(i).transpose(), xj = X.row(j).transpose();
        const double k = rbf(xj, xi, h);
        acc += k * g.row(j).transpose() + (2.0 / h) * (xi - xj) * k;
      }
      acc /= 3.0;
      CHECK((phi.row(i).transpose() - acc).norm() < 1e-12);
    }
  }
}

TEST_CASE("svgd direction rejects shape mismatch") {
  const ParticleSet X(random_matrix(3, 2, 0));
  const KernelEval ker = rbf_kernel(X, 1.0);
  CHECK_THROWS_AS(svgd_direction(X, Eigen::MatrixXd::Zero(3, 3), ker), ContractError);
  CHECK_THROWS_AS(svgd_direction(X, Eigen::MatrixXd::Zero(2, 2), ker), ContractError);
}

TEST_CASE("repulsion sums to zero for a symmetric arrangement") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, -1, 0, 0, 2, 0, -2;
  const KernelEval ker = rbf_kernel(ParticleSet(X), median_bandwidth(ParticleSet(X)));
  const Eigen::MatrixXd phi = svgd_direction(ParticleSet(X), Eigen::MatrixXd::Zero(4, 2), ker);
  CHECK(phi.colwise().sum().norm() < 1e-14);
}

TEST_CASE("line search accepts a full descent step") {
  const ParticleSet X(random_matrix(5, 2, 3));
  const BatchObjective bowl = [](const Eigen::MatrixXd& Y) { return Y.squaredNorm(); };
  StepControl ctl;
  ctl.eps0 = 0.1;
  CHECK(backtracking_line_search(bowl, X, -2.0 * X.positions(), ctl) == 0.1);
}

TEST_CASE("line search returns the floor for a zero direction") {
  const ParticleSet X(random_matrix(5, 2, 3));
  const BatchObjective bowl = [](const Eigen::MatrixXd& Y) { return Y.squaredNorm(); };
  StepControl ctl;
  CHECK(backtracking_line_search(bowl, X, Eigen::MatrixXd::Zero(5, 2), ctl) == ctl.min_eps);
}

TEST_CASE("line search backtracks over infeasible barrier trials") {
  // -log(1 - x) - 3x is finite only for x < 1 and decreases up to x = 2/3.
  // From 0.5 the trials 1.5 (NaN) and 1.0 (Inf) fail, 0.75 is accepted.
  const BatchObjective obj = [](const Eigen::MatrixXd& Y) {
    const double x = Y(0, 0);
    return x < 1.0 ? -std::log(1.0 - x) - 3.0 * x : std::nan("");
  };
  const ParticleSet X(Eigen::MatrixXd::Constant(1, 1, 0.5));
  StepControl ctl;
  ctl.eps0 = 1.0;
  ctl.beta = 0.5;
  CHECK(backtracking_line_search(obj, X, Eigen::MatrixXd::Ones(1, 1), ctl) == 0.25);
}

TEST_CASE("line search rejects a non-finite start") {
  const BatchObjective bad = [](const Eigen::MatrixXd&) { return std::nan(""); };
  const ParticleSet X(Eigen::MatrixXd::Zero(2, 2));
  CHECK_THROWS_AS(backtracking_line_search(bad, X, Eigen::MatrixXd::Ones(2, 2), StepControl{}),
                  InvalidStateError);
}

TEST_CASE("line search never increases the objective unless floored") {
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd A = random_matrix(3, 3, 1000 + t);
    const BatchObjective obj = [&](const Eigen::MatrixXd& Y) {
      return (Y * A).squaredNorm() + std::sin(3.0 * Y.sum());
    };
    const ParticleSet X(random_matrix(4, 3, 2000 + t));
    const Eigen::MatrixXd dir = random_matrix(4, 3, 3000 + t);
    StepControl ctl;
    ctl.eps0 = 1.0;
    ctl.max_backtracks = 10;
    ctl.min_eps = 1e-5;
    const double eps = backtracking_line_search(obj, X, dir, ctl);
    if (eps != ctl.min_eps) {
      CHECK(obj(X.positions() + eps * dir) < obj(X.positions()));
    }
  }
}

TEST_CASE("step control validation") {
  StepControl ctl;
  CHECK_NOTHROW(ctl.validate());
  ctl.min_eps = ctl.eps0;
  CHECK_THROWS_AS(ctl.validate(), ParameterError);
  ctl = StepControl{};
  ctl.beta = 1.0;
  CHECK_THROWS_AS(ctl.validate(), ParameterError);
  ctl = StepControl{};
  ctl.min_eps = 0.0;
  CHECK_THROWS_AS(ctl.validate(), ParameterError);
}

TEST_CASE("project box clamps componentwise") {
  Eigen::MatrixXd X(1, 2);
  X << -1, 2;
  const ParticleSet Y = project_box(ParticleSet(X), Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
  CHECK(Y.positions()(0, 0) == 0.0);
  CHECK(Y.positions()(0, 1) == 1.0);
}

TEST_CASE("project box leaves interior and unbounded coordinates alone") {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd X(2, 2);
  X << 0.3, -50, 0.7, 1e6;
  const ParticleSet Y =
      project_box(ParticleSet(X), Eigen::Vector2d(0, -inf), Eigen::Vector2d(1, inf));
  CHECK(Y.positions() == X);
}

TEST_CASE("project box rejects inverted bounds") {
  const ParticleSet X(Eigen::MatrixXd::Zero(1, 2));
  CHECK_THROWS_AS(project_box(X, Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0)), ParameterError);
}

TEST_CASE("project box is idempotent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParticleSet X(random_matrix(10, 3, seed, 3.0));
    const Eigen::Vector3d lo(-1, -2, -0.5), hi(1, 0.5, 2);
    const ParticleSet once = project_box(X, lo, hi);
    CHECK(project_box(once, lo, hi).positions() == once.positions());
  }
}

TEST_CASE("particle set rejects non-finite entries") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 2);
  X(1, 1) = std::nan("");
  CHECK_THROWS(ParticleSet{X});
  ParticleSet ok(Eigen::MatrixXd::Zero(2, 2));
  CHECK_THROWS(ok.assign(X));
  CHECK_THROWS(ok.assign(Eigen::MatrixXd::Zero(3, 2)));
}
