#pragma once

#include <cstdint>
#include <array>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "csvgd/se3.hpp"
#include "csvgd/solvers.hpp"

namespace csvgd {

/// f(x) = x1 + x2 subject to x1² + x2² - 2 <= 0 on the box [-bound, bound]².
Problem toy2d_problem(double alpha = 1.0, double bound = 2.0);

struct CircleObstacle {
  Eigen::Vector2d center;
  double radius = 0.0;
};

/// Closest point of segment [a, b] to c as the segment parameter s in [0, 1].
double segment_closest_parameter(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                 const Eigen::Vector2d& c);
double point_segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                              const Eigen::Vector2d& c);

struct TrajectorySpec {
  Eigen::Vector2d start{0.0, 0.0};
  Eigen::Vector2d goal{1.0, 1.0};
  int waypoints = 20;
  std::vector<CircleObstacle> obstacles;
  double alpha = 1.0;
  /// Std-dev of the Gaussian perturbation around the straight-line initial guess.
  double init_noise = 0.1;
};

/// Default desk-scale scene: three obstacles between start and goal.
TrajectorySpec default_trajectory_spec();

/// Decision vector: free waypoints x_1..x_T stacked as [x_1; y_1; ...].
/// f = Σ_t ‖x_{t+1} - 2 x_t + x_{t-1}‖²; one inequality r - dist(segment, c)
/// per (segment, obstacle) pair, segments running start -> x_1 -> ... -> goal.
Problem trajectory_problem(const TrajectorySpec& spec);

/// Full waypoint polyline including the fixed start and goal.
std::vector<Eigen::Vector2d> trajectory_polyline(const TrajectorySpec& spec,
                                                 const Eigen::VectorXd& x);

struct IkSpec {
  KinematicChain chain = benchmark_arm();
  Transform target;
  Vector6 weights = Vector6::Ones();
  double alpha = 1.0;
  double z_target = 0.0;
  /// Initial joints are uniform in the middle `init_spread` fraction of each joint range.
  double init_spread = 1.0;
};

/// Default target: a reachable pose with a vertical tool axis.
IkSpec default_ik_spec();

/// h1 = r_x² + r_y² of log(fk(q)), the wrist-vertical constraint.
double ik_wrist_constraint(const KinematicChain& chain, const Eigen::VectorXd& q);
/// h2 = (z(fk(q)) - z_target)², the height constraint.
double ik_height_constraint(const KinematicChain& chain, const Eigen::VectorXd& q,
                            double z_target);

/// f = ‖log(fk(q)⁻¹ target)‖²_W, equalities h1 and h2, joint limits as the box.
Problem ik_problem(const IkSpec& spec);

struct IcpScene {
  Eigen::Matrix3Xd scene;
  Eigen::Matrix3Xd object;
  /// Pose parameters [t; rotation vector] aligning the object with the scene.
  Vector6 true_pose = Vector6::Zero();
  double table_radius = 0.3;
};

struct CylinderSceneSpec {
  double table_radius = 0.3;
  double cylinder_radius = 0.06;
  double cylinder_height = 0.2;
  Eigen::Vector2d center{0.08, -0.05};
  int table_points = 500;
  int object_points = 400;
  int visible_object_points = 250;
  /// Half-width of the occluded angular sector on the far side of the object.
  double occlusion_half_angle = 1.2;
  double noise = 0.002;
  std::uint64_t seed = 7;
};

/// Synthetic cylinder on a disk table seen from one side: the scene misses the
/// far side of the cylinder and a shadow stripe on the table behind it.
IcpScene make_cylinder_scene(const CylinderSceneSpec& spec);

struct IcpSpec {
  IcpScene scene;
  int subset_size = 64;
  double d_max = 0.03;
  double alpha = 500.0;
  std::uint64_t seed = 0;
  /// Height band used to initialise particle positions above the table.
  double init_height = 0.2;
};

/// Stateful truncated nearest-neighbour cost over a resampled object subset.
class IcpCost {
 public:
  IcpCost(std::shared_ptr<const IcpScene> scene, int subset_size, double d_max,
          std::uint64_t seed);

  /// Draws the subset used until the next call. Deterministic in (seed, sweep).
  void resample(long sweep);
  void set_subset(std::vector<int> indices);
  [[nodiscard]] const std::vector<int>& subset() const { return subset_; }

  [[nodiscard]] double value(const Vector6& pose) const;
  [[nodiscard]] Vector6 gradient(const Vector6& pose) const;

  /// Distance from p to the nearest scene point, and that point's index.
  [[nodiscard]] std::pair<double, Eigen::Index> nearest(const Eigen::Vector3d& p) const;

  /// True when every subset point at this pose is at least `margin` away from a
  /// kink of the cost: the d_max cutoff, a nearest-neighbour switch, or d = 0.
  [[nodiscard]] bool smooth_at(const Vector6& pose, double margin) const;

 private:
  /// Nearest scene point closer than d_max, via the cell grid; index -1 if none.
  [[nodiscard]] std::pair<double, Eigen::Index> nearest_within(const Eigen::Vector3d& p) const;
  [[nodiscard]] std::array<long, 3> cell_of(const Eigen::Vector3d& p) const;

  std::shared_ptr<const IcpScene> scene_;
  int subset_size_;
  double d_max_;
  std::uint64_t seed_;
  std::vector<int> subset_;
  // scene points bucketed into cubes of side d_max
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> grid_;
};

/// f(x) = (1/(1+N)) Σ truncated NN distance of the transformed subset;
/// g1 = -z, g2 = x² + y² - r², h = r_x² + r_y² of the pose's rotation vector.
Problem icp_problem(const IcpSpec& spec, std::shared_ptr<IcpCost>* cost_out = nullptr);

/// Yaw angle (rotation about z) of the pose parameters.
double pose_yaw(const Vector6& pose);

}  // namespace csvgd
