#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "csvgd/errors.hpp"
#include "csvgd/se3.hpp"
#include "csvgd/svgd.hpp"

using namespace csvgd;

namespace {

constexpr double kPi = std::numbers::pi;

// random rotation vector with angle uniform in [0, max_angle]
Eigen::Vector3d random_rotvec(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Eigen::Vector3d axis(nd(rng), nd(rng), nd(rng));
  return axis.normalized() * u(rng);
}

Transform random_transform(std::mt19937_64& rng, double max_angle = 3.0) {
  std::normal_distribution<double> nd;
  Transform T;
  T.R = so3_exp(random_rotvec(rng, max_angle));
  T.t = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
  return T;
}

double frob(const Transform& A, const Transform& B) { return (A.matrix() - B.matrix()).norm(); }

}  // namespace

TEST_CASE("log of identity and exp of zero") {
  CHECK(se3_log(Transform::identity()).norm() == 0.0);
  CHECK(frob(se3_exp(Screw::Zero()), Transform::identity()) == 0.0);
}

TEST_CASE("quarter turn about z") {
  const Transform T = Transform::rotation(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix());
  const Screw xi = se3_log(T);
  const Screw expected = (Screw() << 0, 0, 0, 0, 0, kPi / 2).finished();
  CHECK((xi - expected).norm() < 1e-12);
}

TEST_CASE("so3 exp agrees with Eigen angle-axis") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector3d w = random_rotvec(rng, 3.0);
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    CHECK((so3_exp(w) - ref).norm() < 1e-12);
  }
}

TEST_CASE("se3 exp/log round trip over random transforms") {
  std::mt19937_64 rng(0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Transform T = random_transform(rng);
    worst = std::max(worst, frob(se3_exp(se3_log(T)), T));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("so3 log/exp round trip preserves the rotation vector") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Vector3d w = random_rotvec(rng, 3.0);
    CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-9);
  }
}

TEST_CASE("small-angle branch stays accurate") {
  for (double a : {1e-12, 1e-9, 1e-8, 5e-8, 2e-7}) {
    const Screw xi = (Screw() << 0.3, -0.2, 0.1, a, -a, 0.5 * a).finished();
    CHECK((se3_log(se3_exp(xi)) - xi).norm() < 1e-10);
  }
}

TEST_CASE("log rejects a half turn and invalid rotations") {
  const Transform half = Transform::rotation(so3_exp(Eigen::Vector3d(kPi, 0, 0)));
  CHECK_THROWS_AS(se3_log(half), GeometryError);
  CHECK_NOTHROW(se3_log_any(half));
  CHECK(se3_log_any(half).tail<3>().norm() == doctest::Approx(kPi).epsilon(1e-9));
  Transform bad;
  bad.R(0, 1) = 0.3;
  CHECK_THROWS_AS(se3_log(bad), GeometryError);
  CHECK_THROWS_AS(se3_log_any(bad), GeometryError);
}

TEST_CASE("composition is associative and inverse cancels") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Transform A = random_transform(rng), B = random_transform(rng), C = random_transform(rng);
    CHECK(frob((A * B) * C, A * (B * C)) < 1e-12);
    CHECK(frob(A * A.inverse(), Transform::identity()) < 1e-12);
    CHECK(A.is_valid());
  }
}

TEST_CASE("left jacobian inverse is the inverse") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Vector3d w = random_rotvec(rng, 3.0);
    CHECK((so3_left_jacobian(w) * so3_left_jacobian_inverse(w) - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("se3 left jacobian inverse linearises the log") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    const Transform T = random_transform(rng, 2.5);
    const Screw xi = se3_log(T);
    Screw d;
    for (int k = 0; k < 6; ++k) d[k] = 1e-6 * nd(rng);
    const Screw moved = se3_log(se3_exp(d) * T);
    CHECK((moved - xi - se3_left_jacobian_inverse(xi) * d).norm() < 1e-10);
  }
}

TEST_CASE("weighted screw norm") {
  const Vector6 I = Vector6::Ones();
  CHECK(weighted_screw_norm(Screw::Zero(), I) == 0.0);
  const Screw xi = (Screw() << 1, -2, 3, 0.5, 0, 1).finished();
  CHECK(weighted_screw_norm(xi, I) == doctest::Approx(xi.squaredNorm()));
  const Vector6 W = (Vector6() << 1, 1, 1, 2, 2, 2).finished();
  CHECK(weighted_screw_norm((Screw() << 1, 0, 0, 1, 0, 0).finished(), W) == 3.0);
}

TEST_CASE("fk of a single revolute z joint") {
  KinematicChain chain;
  chain.joints.push_back({Eigen::Vector3d::UnitZ(), Transform::translation(Eigen::Vector3d(1, 0, 0))});
  chain.lo = Eigen::VectorXd::Constant(1, -kPi);
  chain.hi = Eigen::VectorXd::Constant(1, kPi);
  const Transform T = fk(chain, Eigen::VectorXd::Constant(1, kPi / 2));
  CHECK((T.t - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("fk at zero is the product of offsets") {
  const KinematicChain arm = benchmark_arm();
  Transform prod = arm.base;
  for (const Joint& j : arm.joints) prod = prod * j.offset;
  CHECK(frob(fk(arm, Eigen::VectorXd::Zero(arm.size())), prod) < 1e-12);
}

TEST_CASE("benchmark arm layout") {
  const KinematicChain arm = benchmark_arm();
  CHECK(arm.size() == 6);
  for (const Joint& j : arm.joints) CHECK(j.axis.norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < 6; ++k) {
    CHECK(arm.lo[k] == doctest::Approx(-2.9));
    CHECK(arm.hi[k] == doctest::Approx(2.9));
  }
}

TEST_CASE("chain jacobian matches central differences of fk") {
  const KinematicChain arm = benchmark_arm();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double step = 1e-6;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd q(6);
    for (int k = 0; k < 6; ++k) q[k] = u(rng);
    const auto J = fk_with_frames(arm, q).jacobian();
    for (int k = 0; k < 6; ++k) {
      Eigen::VectorXd up = q, down = q;
      up[k] += step;
      down[k] -= step;
      const Eigen::Vector3d dp = (fk(arm, up).t - fk(arm, down).t) / (2 * step);
      // angular part: R(up) R(down)^T ~ exp(2 step w)
      const Eigen::Vector3d dw = so3_log(fk(arm, up).R * fk(arm, down).R.transpose()) / (2 * step);
      CHECK((J.block<3, 1>(3, k) - dp).norm() < 1e-6);
      CHECK((J.block<3, 1>(0, k) - dw).norm() < 1e-6);
    }
  }
}

TEST_CASE("pose cost is zero at the target") {
  const KinematicChain arm = benchmark_arm();
  Eigen::VectorXd q(6);
  q << 0.3, -0.4, 0.8, 0.1, -0.6, 0.2;
  const Transform target = fk(arm, q);
  const auto [cost, grad] = pose_cost_and_grad(arm, q, target, Vector6::Ones());
  CHECK(cost < 1e-20);
  CHECK(grad.norm() < 1e-6);
}

TEST_CASE("pose cost gradient agrees with a coarser stencil") {
  const KinematicChain arm = benchmark_arm();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const Vector6 W = (Vector6() << 1, 1, 1, 0.3, 0.3, 0.3).finished();
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd q(6), q2(6);
    for (int k = 0; k < 6; ++k) {
      q[k] = u(rng);
      q2[k] = q[k] + 0.4 * u(rng);
    }
    const Transform target = fk(arm, q2);
    const auto [c, g] = pose_cost_and_grad(arm, q, target, W);
    const auto [c2, g2] = pose_cost_and_grad(arm, q, target, W, 1e-4);
    CHECK(c == c2);
    CHECK((g - g2).norm() < 1e-3 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("pose cost is invariant under a common left transform") {
  const KinematicChain arm = benchmark_arm();
  std::mt19937_64 rng(8);
  Eigen::VectorXd q(6);
  q << 0.5, 0.2, -0.7, 1.0, 0.3, -0.2;
  const Transform target = se3_exp((Screw() << 0.4, 0.1, 0.5, 0.2, -0.1, 0.3).finished());
  const Transform G = random_transform(rng, 2.0);
  KinematicChain moved = arm;
  moved.base = G * arm.base;
  const Vector6 W = (Vector6() << 1, 2, 3, 1, 1, 0.5).finished();
  const double a = pose_cost_and_grad(arm, q, target, W).first;
  const double b = pose_cost_and_grad(moved, q, G * target, W).first;
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("se3 kernel on random pose pairs") {
  std::mt19937_64 rng(9);
  const Vector6 W = (Vector6() << 1, 1, 1, 2, 2, 2).finished();
  for (int t = 0; t < 100; ++t) {
    const Transform A = random_transform(rng), B = random_transform(rng);
    const KernelEval ker = se3_kernel(std::vector<Transform>{A, B}, 1.3, W);
    CHECK(ker.K(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ker.K(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ker.K(0, 1) == doctest::Approx(ker.K(1, 0)).epsilon(1e-12));
  }
}
