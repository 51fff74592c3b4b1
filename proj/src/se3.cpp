#include "csvgd/se3.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

constexpr double kSmallAngle = 1e-7;
constexpr double kBranchMargin = 1e-6;

void require_valid_rotation(const Eigen::Matrix3d& R) {
  const double orth = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
  const double det = R.determinant();
  if (!(orth <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9)) {
    throw GeometryError("rotation block is not in SO(3)");
  }
}

}  // namespace

Transform Transform::translation(const Eigen::Vector3d& t) {
  Transform T;
  T.t = t;
  return T;
}

Transform Transform::rotation(const Eigen::Matrix3d& R) {
  Transform T;
  T.R = R;
  return T;
}

Transform Transform::operator*(const Transform& other) const {
  Transform out;
  out.R = R * other.R;
  out.t = R * other.t + t;
  return out;
}

Transform Transform::inverse() const {
  Transform out;
  out.R = R.transpose();
  out.t = -(out.R * t);
  return out;
}

Eigen::Matrix4d Transform::matrix() const {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.topLeftCorner<3, 3>() = R;
  M.topRightCorner<3, 1>() = t;
  return M;
}

bool Transform::is_valid(double tol) const {
  if (!R.allFinite() || !t.allFinite()) return false;
  const double orth = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
  return orth <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d W;
  W << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return W;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& W) { return {W(2, 1), W(0, 2), W(1, 0)}; }

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < kSmallAngle) {
    const Eigen::Matrix3d W = hat(w);
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  if (s < kSmallAngle) {
    // 2 atan(s/w)/s ~ (2/w)(1 - s²/(3w²))
    const double w = q.w();
    return (2.0 / w) * (1.0 - s * s / (3.0 * w * w)) * v;
  }
  const double theta = 2.0 * std::atan2(s, q.w());
  return (theta / s) * v;
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d W = hat(w);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + W * W / 6.0;
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * W +
         (theta - std::sin(theta)) / (t2 * theta) * W * W;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d W = hat(w);
  double coeff;
  if (theta < 1e-4) {
    coeff = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const double half = 0.5 * theta;
    coeff = 1.0 / (theta * theta) - std::cos(half) / (2.0 * theta * std::sin(half));
  }
  return Eigen::Matrix3d::Identity() - 0.5 * W + coeff * W * W;
}

Transform se3_exp(const Screw& xi) {
  const Eigen::Vector3d rho = xi.head<3>();
  const Eigen::Vector3d phi = xi.tail<3>();
  Transform T;
  T.R = so3_exp(phi);
  T.t = so3_left_jacobian(phi) * rho;
  return T;
}

Screw se3_log_any(const Transform& T) {
  require_valid_rotation(T.R);
  const Eigen::Vector3d phi = so3_log(T.R);
  Screw xi;
  xi.head<3>() = so3_left_jacobian_inverse(phi) * T.t;
  xi.tail<3>() = phi;
  return xi;
}

Screw se3_log(const Transform& T) {
  require_valid_rotation(T.R);
  const Eigen::Vector3d phi = so3_log(T.R);
  if (phi.norm() > std::numbers::pi - kBranchMargin) {
    throw GeometryError("se3_log: rotation angle at pi is outside the principal branch");
  }
  Screw xi;
  xi.head<3>() = so3_left_jacobian_inverse(phi) * T.t;
  xi.tail<3>() = phi;
  return xi;
}

Matrix6 se3_left_jacobian_inverse(const Screw& xi) {
  const Eigen::Vector3d rho = xi.head<3>();
  const Eigen::Vector3d phi = xi.tail<3>();
  const double theta = phi.norm();
  const Eigen::Matrix3d P = hat(rho);
  const Eigen::Matrix3d F = hat(phi);

  double c1, c2, c3;
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Eigen::Matrix3d FP = F * P;
  const Eigen::Matrix3d PF = P * F;
  const Eigen::Matrix3d FPF = FP * F;
  const Eigen::Matrix3d Q = 0.5 * P + c1 * (FP + PF + FPF) +
                            c2 * (F * FP + PF * F - 3.0 * FPF) +
                            c3 * (FPF * F + F * FPF);

  const Eigen::Matrix3d Jinv = so3_left_jacobian_inverse(phi);
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = Jinv;
  out.topRightCorner<3, 3>() = -Jinv * Q * Jinv;
  out.bottomRightCorner<3, 3>() = Jinv;
  return out;
}

double weighted_screw_norm(const Screw& xi, const Vector6& weights) {
  if ((weights.array() < 0.0).any()) {
    throw ParameterError("screw weights must be nonnegative");
  }
  return xi.dot(weights.cwiseProduct(xi));
}

Transform pose_from_params(const Vector6& params) {
  Transform T;
  T.R = so3_exp(params.tail<3>());
  T.t = params.head<3>();
  return T;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> ChainKinematics::jacobian() const {
  const auto m = static_cast<Eigen::Index>(axes.size());
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, m);
  const Eigen::Vector3d& p = end_effector.t;
  for (Eigen::Index k = 0; k < m; ++k) {
    J.block<3, 1>(0, k) = axes[k];
    J.block<3, 1>(3, k) = axes[k].cross(p - origins[k]);
  }
  return J;
}

ChainKinematics fk_with_frames(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.size()) {
    throw ContractError("joint vector length does not match the chain");
  }
  ChainKinematics out;
  out.axes.reserve(chain.joints.size());
  out.origins.reserve(chain.joints.size());
  Transform T = chain.base;
  for (int k = 0; k < chain.size(); ++k) {
    const Joint& joint = chain.joints[k];
    out.axes.push_back(T.R * joint.axis);
    out.origins.push_back(T.t);
    T = T * Transform::rotation(so3_exp(joint.axis * q[k])) * joint.offset;
  }
  out.end_effector = T;
  return out;
}

Transform fk(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.size()) {
    throw ContractError("joint vector length does not match the chain");
  }
  Transform T = chain.base;
  for (int k = 0; k < chain.size(); ++k) {
    const Joint& joint = chain.joints[k];
    T = T * Transform::rotation(so3_exp(joint.axis * q[k])) * joint.offset;
  }
  return T;
}

std::pair<double, Eigen::VectorXd> pose_cost_and_grad(const KinematicChain& chain,
                                                      const Eigen::VectorXd& q,
                                                      const Transform& target,
                                                      const Vector6& weights,
                                                      double fd_step) {
  auto cost = [&](const Eigen::VectorXd& x) {
    return weighted_screw_norm(se3_log_any(fk(chain, x).inverse() * target), weights);
  };
  const double value = cost(q);
  Eigen::VectorXd grad(q.size());
  Eigen::VectorXd x = q;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    x[k] = q[k] + fd_step;
    const double up = cost(x);
    x[k] = q[k] - fd_step;
    const double down = cost(x);
    x[k] = q[k];
    grad[k] = (up - down) / (2.0 * fd_step);
  }
  return {value, grad};
}

KinematicChain benchmark_arm() {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  const double lengths[6] = {0.33, 0.33, 0.33, 0.18, 0.18, 0.10};
  const Eigen::Vector3d axes[6] = {z, y, y, z, y, z};

  KinematicChain chain;
  for (int k = 0; k < 6; ++k) {
    chain.joints.push_back({axes[k], Transform::translation(lengths[k] * z)});
  }
  chain.lo = Eigen::VectorXd::Constant(6, -2.9);
  chain.hi = Eigen::VectorXd::Constant(6, 2.9);
  return chain;
}

}  // namespace csvgd
