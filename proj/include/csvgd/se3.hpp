#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace csvgd {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Element of se(3), ordered translation part first: [t_x, t_y, t_z, r_x, r_y, r_z].
using Screw = Vector6;

/// Rigid transform x -> R x + t.
struct Transform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Transform identity() { return {}; }
  static Transform translation(const Eigen::Vector3d& t);
  static Transform rotation(const Eigen::Matrix3d& R);

  Transform operator*(const Transform& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return R * p + t; }
  [[nodiscard]] Transform inverse() const;
  [[nodiscard]] Eigen::Matrix4d matrix() const;

  /// RᵀR = I and det R = 1, both within `tol`.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const;
};

Eigen::Matrix3d hat(const Eigen::Vector3d& w);
Eigen::Vector3d vee(const Eigen::Matrix3d& W);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);

/// Rotation vector of R. Total on SO(3): at an angle of exactly pi the axis
/// sign is whatever the quaternion conversion produces.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

/// Left Jacobian of SO(3) and its inverse. The right Jacobian is the transpose.
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w);
Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& w);

Transform se3_exp(const Screw& xi);

/// Principal-branch logarithm. Throws GeometryError for an invalid rotation
/// block or a rotation angle within 1e-6 of pi.
Screw se3_log(const Transform& T);

/// Same map without the branch check, for cost functions that must be
/// evaluable at any configuration. Still rejects invalid rotations.
Screw se3_log_any(const Transform& T);

/// Inverse of the SE(3) left Jacobian at xi: log(Exp(d) T) ~ xi + J⁻¹ d.
Matrix6 se3_left_jacobian_inverse(const Screw& xi);

/// xiᵀ W xi for diagonal W given by its diagonal.
double weighted_screw_norm(const Screw& xi, const Vector6& weights);

/// Pose parameterised as [translation; rotation vector] -> transform.
Transform pose_from_params(const Vector6& params);

struct Joint {
  Eigen::Vector3d axis;  // unit, in the parent frame
  Transform offset;      // applied after the joint rotation
};

/// Serial chain of revolute joints. fk(q) = prod_k Rot(axis_k, q_k) * offset_k.
struct KinematicChain {
  std::vector<Joint> joints;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Transform base = Transform::identity();

  [[nodiscard]] int size() const { return static_cast<int>(joints.size()); }
};

/// End-effector pose plus the world-frame axis and origin of every joint.
struct ChainKinematics {
  Transform end_effector;
  std::vector<Eigen::Vector3d> axes;
  std::vector<Eigen::Vector3d> origins;

  /// Spatial angular-velocity (rows 0..2) and position (rows 3..5) Jacobian.
  [[nodiscard]] Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian() const;
};

Transform fk(const KinematicChain& chain, const Eigen::VectorXd& q);
ChainKinematics fk_with_frames(const KinematicChain& chain, const Eigen::VectorXd& q);

/// ‖log(fk(q)⁻¹ target)‖²_W and its gradient in q (central differences).
std::pair<double, Eigen::VectorXd> pose_cost_and_grad(const KinematicChain& chain,
                                                      const Eigen::VectorXd& q,
                                                      const Transform& target,
                                                      const Vector6& weights,
                                                      double fd_step = 1e-6);

/// Fixed 6-DOF all-revolute arm used by the IK benchmark.
/// Link lengths 0.33, 0.33, 0.33, 0.18, 0.18, 0.10 m; limits +-2.9 rad.
KinematicChain benchmark_arm();

}  // namespace csvgd
