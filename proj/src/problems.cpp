#include "csvgd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

Eigen::Vector2d waypoint(const TrajectorySpec& spec, const Eigen::VectorXd& x, int t) {
  if (t == 0) return spec.start;
  if (t == spec.waypoints + 1) return spec.goal;
  return x.segment<2>(2 * (t - 1));
}

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

Problem toy2d_problem(double alpha, double bound) {
  if (!(alpha > 0.0)) throw ParameterError("toy2d alpha must be positive");
  Problem P;
  P.name = "toy2d";
  P.dim = 2;
  P.alpha = alpha;
  P.f = [](const Eigen::VectorXd& x) { return x[0] + x[1]; };
  P.grad_f = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(2).eval(); };
  P.constraints.lo = Eigen::VectorXd::Constant(2, -bound);
  P.constraints.hi = Eigen::VectorXd::Constant(2, bound);
  P.constraints.inequalities.push_back(
      {[](const Eigen::VectorXd& x) { return x[0] * x[0] + x[1] * x[1] - 2.0; },
       [](const Eigen::VectorXd& x) { return (2.0 * x).eval(); }, "disk"});
  P.init_sampler = [bound](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::VectorXd x(2);
    x[0] = u(rng);
    x[1] = u(rng);
    return x;
  };
  return P;
}

double segment_closest_parameter(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                 const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((c - a).dot(ab) / len2, 0.0, 1.0);
}

double point_segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                              const Eigen::Vector2d& c) {
  const double s = segment_closest_parameter(a, b, c);
  return (c - (a + s * (b - a))).norm();
}

TrajectorySpec default_trajectory_spec() {
  TrajectorySpec spec;
  spec.start = {0.0, 0.0};
  spec.goal = {2.0, 0.0};
  spec.waypoints = 20;
  spec.obstacles = {{{0.55, 0.03}, 0.14}, {{1.0, -0.06}, 0.12}, {{1.45, 0.04}, 0.14}};
  spec.alpha = 2000.0;
  spec.init_noise = 0.05;
  return spec;
}

std::vector<Eigen::Vector2d> trajectory_polyline(const TrajectorySpec& spec,
                                                 const Eigen::VectorXd& x) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(spec.waypoints) + 2);
  for (int t = 0; t <= spec.waypoints + 1; ++t) pts.push_back(waypoint(spec, x, t));
  return pts;
}

Problem trajectory_problem(const TrajectorySpec& spec) {
  if (spec.waypoints < 2) throw ParameterError("trajectory needs at least two free waypoints");
  for (const CircleObstacle& o : spec.obstacles) {
    if ((spec.start - o.center).norm() <= o.radius || (spec.goal - o.center).norm() <= o.radius) {
      throw ParameterError("an obstacle contains the start or goal");
    }
  }
  const int T = spec.waypoints;
  Problem P;
  P.name = "trajectory";
  P.dim = 2 * T;
  P.alpha = spec.alpha;
  P.f = [spec, T](const Eigen::VectorXd& x) {
    double total = 0.0;
    for (int t = 1; t <= T; ++t) {
      total += (waypoint(spec, x, t + 1) - 2.0 * waypoint(spec, x, t) + waypoint(spec, x, t - 1))
                   .squaredNorm();
    }
    return total;
  };
  P.grad_f = [spec, T](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * T);
    for (int t = 1; t <= T; ++t) {
      const Eigen::Vector2d acc =
          waypoint(spec, x, t + 1) - 2.0 * waypoint(spec, x, t) + waypoint(spec, x, t - 1);
      const Eigen::Vector2d two_acc = 2.0 * acc;
      // d/dx_{t+1}: +1, d/dx_t: -2, d/dx_{t-1}: +1; fixed endpoints are skipped
      if (t + 1 <= T) g.segment<2>(2 * t) += two_acc;
      g.segment<2>(2 * (t - 1)) -= 2.0 * two_acc;
      if (t - 1 >= 1) g.segment<2>(2 * (t - 2)) += two_acc;
    }
    return g;
  };
  P.constraints = ConstraintSet::unbounded(2 * T);
  for (int t = 0; t <= T; ++t) {
    for (std::size_t k = 0; k < spec.obstacles.size(); ++k) {
      const CircleObstacle obs = spec.obstacles[k];
      ScalarFunction g;
      g.name = "segment_" + std::to_string(t) + "_obstacle_" + std::to_string(k);
      g.value = [spec, obs, t](const Eigen::VectorXd& x) {
        return obs.radius -
               point_segment_distance(waypoint(spec, x, t), waypoint(spec, x, t + 1), obs.center);
      };
      g.gradient = [spec, obs, t, T](const Eigen::VectorXd& x) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(2 * T);
        const Eigen::Vector2d a = waypoint(spec, x, t);
        const Eigen::Vector2d b = waypoint(spec, x, t + 1);
        const double s = segment_closest_parameter(a, b, obs.center);
        const Eigen::Vector2d diff = obs.center - (a + s * (b - a));
        const double dist = diff.norm();
        if (dist == 0.0) return grad;
        // g = r - dist; d dist / d a = -(1 - s) diff / dist, d dist / d b = -s diff / dist
        const Eigen::Vector2d unit = diff / dist;
        if (t >= 1) grad.segment<2>(2 * (t - 1)) = (1.0 - s) * unit;
        if (t + 1 <= T) grad.segment<2>(2 * t) = s * unit;
        return grad;
      };
      P.constraints.inequalities.push_back(std::move(g));
    }
  }
  P.init_sampler = [spec, T](std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, spec.init_noise);
    Eigen::VectorXd x(2 * T);
    for (int t = 1; t <= T; ++t) {
      const double s = static_cast<double>(t) / static_cast<double>(T + 1);
      const Eigen::Vector2d p = spec.start + s * (spec.goal - spec.start);
      x[2 * (t - 1)] = p.x() + noise(rng);
      x[2 * (t - 1) + 1] = p.y() + noise(rng);
    }
    return x;
  };
  return P;
}

IkSpec default_ik_spec() {
  IkSpec spec;
  Eigen::VectorXd q_star(6);
  q_star << 0.3, 0.6, 0.5, 0.0, -1.1, 0.2;
  spec.target = fk(spec.chain, q_star);
  spec.z_target = spec.target.t.z();
  spec.alpha = 20.0;
  spec.init_spread = 0.3;
  return spec;
}

double ik_wrist_constraint(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Eigen::Vector3d w = so3_log(fk(chain, q).R);
  return w.x() * w.x() + w.y() * w.y();
}

double ik_height_constraint(const KinematicChain& chain, const Eigen::VectorXd& q,
                            double z_target) {
  const double dz = fk(chain, q).t.z() - z_target;
  return dz * dz;
}

Problem ik_problem(const IkSpec& spec) {
  const KinematicChain chain = spec.chain;
  const int m = chain.size();
  double reach = 0.0;
  for (const Joint& joint : chain.joints) reach += joint.offset.t.norm();
  if (!((chain.base.inverse() * spec.target).t.norm() < reach)) {
    throw ParameterError("IK target is out of reach");
  }
  Problem P;
  P.name = "ik";
  P.dim = m;
  P.alpha = spec.alpha;
  const Transform target = spec.target;
  const Vector6 W = spec.weights;
  P.f = [chain, target, W](const Eigen::VectorXd& q) {
    return weighted_screw_norm(se3_log_any(fk(chain, q).inverse() * target), W);
  };
  P.grad_f = [chain, target, W](const Eigen::VectorXd& q) {
    return pose_cost_and_grad(chain, q, target, W).second;
  };
  P.constraints.lo = chain.lo;
  P.constraints.hi = chain.hi;

  ScalarFunction wrist;
  wrist.name = "wrist_vertical";
  wrist.value = [chain](const Eigen::VectorXd& q) { return ik_wrist_constraint(chain, q); };
  wrist.gradient = [chain](const Eigen::VectorXd& q) {
    const ChainKinematics k = fk_with_frames(chain, q);
    const Eigen::Vector3d w = so3_log(k.end_effector.R);
    // d w / d q_k = J_l⁻¹(w) a_k for a world-frame joint axis a_k
    const Eigen::Matrix3d Jinv = so3_left_jacobian_inverse(w);
    Eigen::VectorXd g(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      const Eigen::Vector3d dw = Jinv * k.axes[static_cast<std::size_t>(j)];
      g[j] = 2.0 * (w.x() * dw.x() + w.y() * dw.y());
    }
    return g;
  };
  P.constraints.equalities.push_back(std::move(wrist));

  const double z_target = spec.z_target;
  ScalarFunction height;
  height.name = "height";
  height.value = [chain, z_target](const Eigen::VectorXd& q) {
    return ik_height_constraint(chain, q, z_target);
  };
  height.gradient = [chain, z_target](const Eigen::VectorXd& q) {
    const ChainKinematics k = fk_with_frames(chain, q);
    const Eigen::Vector3d& p = k.end_effector.t;
    Eigen::VectorXd g(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      const auto sj = static_cast<std::size_t>(j);
      g[j] = 2.0 * (p.z() - z_target) * k.axes[sj].cross(p - k.origins[sj]).z();
    }
    return g;
  };
  P.constraints.equalities.push_back(std::move(height));

  const Eigen::VectorXd lo = chain.lo;
  const Eigen::VectorXd hi = chain.hi;
  const double spread = spec.init_spread;
  if (!(spread > 0.0 && spread <= 1.0)) throw ParameterError("init_spread must lie in (0, 1]");
  P.init_sampler = [lo, hi, spread](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Eigen::VectorXd q(lo.size());
    for (Eigen::Index k = 0; k < lo.size(); ++k) {
      q[k] = 0.5 * (lo[k] + hi[k]) + spread * (hi[k] - lo[k]) * u(rng);
    }
    return q;
  };
  return P;
}

IcpScene make_cylinder_scene(const CylinderSceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise);
  const double pi = std::numbers::pi;
  const double R = spec.cylinder_radius;
  const double H = spec.cylinder_height;
  const Eigen::Vector3d base(spec.center.x(), spec.center.y(), 0.0);
  // camera sits on the -x side; the far side of the cylinder and the table
  // strip behind it are occluded
  const double camera_azimuth = pi;
  const double far_azimuth = 0.0;

  std::vector<Eigen::Vector3d> scene;
  while (static_cast<int>(scene.size()) < spec.table_points) {
    const double rad = spec.table_radius * std::sqrt(unit(rng));
    const double ang = 2.0 * pi * unit(rng);
    const Eigen::Vector3d p(rad * std::cos(ang), rad * std::sin(ang), 0.0);
    const Eigen::Vector2d rel = p.head<2>() - spec.center;
    if (rel.norm() < R) continue;
    const double rel_az = std::atan2(rel.y(), rel.x());
    const double lateral = std::abs(rel.norm() * std::sin(rel_az - far_azimuth));
    if (std::cos(rel_az - far_azimuth) > 0.0 && lateral < R) continue;  // shadow stripe
    scene.push_back(p + Eigen::Vector3d(0.0, 0.0, noise(rng)));
  }

  IcpScene out;
  out.table_radius = spec.table_radius;
  std::vector<Eigen::Vector3d> object;
  const int side = spec.object_points * 3 / 4;
  for (int i = 0; i < spec.object_points; ++i) {
    Eigen::Vector3d o;
    if (i < side) {
      const double ang = 2.0 * pi * unit(rng);
      o = {R * std::cos(ang), R * std::sin(ang), H * (unit(rng) - 0.5)};
    } else {
      const double rad = R * std::sqrt(unit(rng));
      const double ang = 2.0 * pi * unit(rng);
      o = {rad * std::cos(ang), rad * std::sin(ang), 0.5 * H};
    }
    object.push_back(o);
  }
  const Eigen::Vector3d centroid = base + Eigen::Vector3d(0.0, 0.0, 0.5 * H);
  int visible = 0;
  while (visible < spec.visible_object_points) {
    const bool top = unit(rng) < 0.25;
    const double ang = 2.0 * pi * unit(rng);
    Eigen::Vector3d o;
    if (top) {
      const double rad = R * std::sqrt(unit(rng));
      o = {rad * std::cos(ang), rad * std::sin(ang), 0.5 * H};
    } else {
      if (std::abs(wrap_angle(ang - camera_azimuth)) > pi - spec.occlusion_half_angle) continue;
      o = {R * std::cos(ang), R * std::sin(ang), H * (unit(rng) - 0.5)};
    }
    scene.push_back(centroid + o + Eigen::Vector3d(noise(rng), noise(rng), noise(rng)));
    ++visible;
  }

  out.scene.resize(3, static_cast<Eigen::Index>(scene.size()));
  for (std::size_t i = 0; i < scene.size(); ++i) out.scene.col(static_cast<Eigen::Index>(i)) = scene[i];
  out.object.resize(3, static_cast<Eigen::Index>(object.size()));
  for (std::size_t i = 0; i < object.size(); ++i) {
    out.object.col(static_cast<Eigen::Index>(i)) = object[i];
  }
  out.true_pose.head<3>() = centroid;
  return out;
}

namespace {

std::uint64_t cell_key(const std::array<long, 3>& c) {
  // 21 bits per axis is far beyond any desk-scale scene
  const auto part = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1FFFFFULL; };
  return part(c[0]) << 42 | part(c[1]) << 21 | part(c[2]);
}

}  // namespace

IcpCost::IcpCost(std::shared_ptr<const IcpScene> scene, int subset_size, double d_max,
                 std::uint64_t seed)
    : scene_(std::move(scene)), subset_size_(subset_size), d_max_(d_max), seed_(seed) {
  if (!scene_ || scene_->scene.cols() == 0 || scene_->object.cols() == 0) {
    throw ParameterError("ICP clouds must be nonempty");
  }
  if (subset_size_ < 1 || subset_size_ > scene_->object.cols()) {
    throw ParameterError("ICP subset size must lie in [1, |object|]");
  }
  if (!(d_max_ > 0.0)) throw ParameterError("ICP truncation distance must be positive");
  for (Eigen::Index k = 0; k < scene_->scene.cols(); ++k) {
    grid_[cell_key(cell_of(scene_->scene.col(k)))].push_back(k);
  }
  resample(0);
}

std::array<long, 3> IcpCost::cell_of(const Eigen::Vector3d& p) const {
  return {static_cast<long>(std::floor(p.x() / d_max_)), static_cast<long>(std::floor(p.y() / d_max_)),
          static_cast<long>(std::floor(p.z() / d_max_))};
}

std::pair<double, Eigen::Index> IcpCost::nearest_within(const Eigen::Vector3d& p) const {
  const std::array<long, 3> c = cell_of(p);
  double best = d_max_ * d_max_;
  Eigen::Index best_idx = -1;
  for (long dx = -1; dx <= 1; ++dx) {
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dz = -1; dz <= 1; ++dz) {
        const auto it = grid_.find(cell_key({c[0] + dx, c[1] + dy, c[2] + dz}));
        if (it == grid_.end()) continue;
        for (Eigen::Index k : it->second) {
          const double d2 = (scene_->scene.col(k) - p).squaredNorm();
          if (d2 < best) {
            best = d2;
            best_idx = k;
          }
        }
      }
    }
  }
  return {std::sqrt(best), best_idx};
}

void IcpCost::resample(long sweep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(sweep), static_cast<std::uint32_t>(sweep >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<int> all(static_cast<std::size_t>(scene_->object.cols()));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < subset_size_; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), all.size() - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[pick(rng)]);
  }
  subset_.assign(all.begin(), all.begin() + subset_size_);
}

void IcpCost::set_subset(std::vector<int> indices) {
  for (int i : indices) {
    if (i < 0 || i >= scene_->object.cols()) throw ContractError("subset index out of range");
  }
  subset_ = std::move(indices);
}

std::pair<double, Eigen::Index> IcpCost::nearest(const Eigen::Vector3d& p) const {
  Eigen::Index best_idx = 0;
  const double best = (scene_->scene.colwise() - p).colwise().squaredNorm().minCoeff(&best_idx);
  return {std::sqrt(best), best_idx};
}

double IcpCost::value(const Vector6& pose) const {
  const Transform T = pose_from_params(pose);
  double total = 0.0;
  for (int idx : subset_) {
    const auto [d, nn] = nearest_within(T * Eigen::Vector3d(scene_->object.col(idx)));
    if (nn >= 0) total += d;
  }
  return total / (1.0 + static_cast<double>(subset_.size()));
}

bool IcpCost::smooth_at(const Vector6& pose, double margin) const {
  const Transform T = pose_from_params(pose);
  for (int idx : subset_) {
    const Eigen::Vector3d p = T * Eigen::Vector3d(scene_->object.col(idx));
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = d1;
    for (Eigen::Index k = 0; k < scene_->scene.cols(); ++k) {
      const double d = (scene_->scene.col(k) - p).norm();
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (d1 < margin || std::abs(d1 - d_max_) < margin) return false;
    if (d1 < d_max_ && d2 - d1 < margin) return false;
  }
  return true;
}

Vector6 IcpCost::gradient(const Vector6& pose) const {
  const Transform T = pose_from_params(pose);
  const Eigen::Matrix3d JlT = so3_left_jacobian(pose.tail<3>()).transpose();
  Vector6 g = Vector6::Zero();
  for (int idx : subset_) {
    const Eigen::Vector3d ro = T.R * Eigen::Vector3d(scene_->object.col(idx));
    const Eigen::Vector3d p = ro + T.t;
    const auto [d, nn] = nearest_within(p);
    if (nn < 0 || d == 0.0) continue;
    const Eigen::Vector3d u = (p - scene_->scene.col(nn)) / d;
    g.head<3>() += u;
    // d(R o)/d w = -hat(R o) J_l(w)
    g.tail<3>() += JlT * ro.cross(u);
  }
  return g / (1.0 + static_cast<double>(subset_.size()));
}

Problem icp_problem(const IcpSpec& spec, std::shared_ptr<IcpCost>* cost_out) {
  auto scene = std::make_shared<const IcpScene>(spec.scene);
  auto cost = std::make_shared<IcpCost>(scene, spec.subset_size, spec.d_max, spec.seed);
  if (cost_out) *cost_out = cost;
  const double r = spec.scene.table_radius;

  Problem P;
  P.name = "icp";
  P.dim = 6;
  P.alpha = spec.alpha;
  P.kernel_kind = KernelKind::Se3;
  P.f = [cost](const Eigen::VectorXd& x) { return cost->value(x); };
  P.grad_f = [cost](const Eigen::VectorXd& x) { return Eigen::VectorXd(cost->gradient(x)); };
  P.before_sweep = [cost](long sweep) { cost->resample(sweep); };
  P.constraints = ConstraintSet::unbounded(6);
  P.constraints.inequalities.push_back(
      {[](const Eigen::VectorXd& x) { return -x[2]; },
       [](const Eigen::VectorXd&) {
         Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
         g[2] = -1.0;
         return g;
       },
       "above_table"});
  P.constraints.inequalities.push_back(
      {[r](const Eigen::VectorXd& x) { return x[0] * x[0] + x[1] * x[1] - r * r; },
       [](const Eigen::VectorXd& x) {
         Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
         g[0] = 2.0 * x[0];
         g[1] = 2.0 * x[1];
         return g;
       },
       "on_table"});
  P.constraints.equalities.push_back(
      {[](const Eigen::VectorXd& x) { return x[3] * x[3] + x[4] * x[4]; },
       [](const Eigen::VectorXd& x) {
         Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
         g[3] = 2.0 * x[3];
         g[4] = 2.0 * x[4];
         return g;
       },
       "upright"});
  const double height = spec.init_height;
  P.init_sampler = [r, height](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const double pi = std::numbers::pi;
    Eigen::VectorXd x(6);
    const double rad = r * std::sqrt(unit(rng));
    const double ang = 2.0 * pi * unit(rng);
    x[0] = rad * std::cos(ang);
    x[1] = rad * std::sin(ang);
    x[2] = height * unit(rng);
    Eigen::Vector3d w;
    do {
      w = {sym(rng), sym(rng), sym(rng)};
    } while (w.squaredNorm() > 1.0);
    x.tail<3>() = pi * w;
    return x;
  };
  return P;
}

double pose_yaw(const Vector6& pose) {
  const Eigen::Matrix3d R = so3_exp(pose.tail<3>());
  return std::atan2(R(1, 0), R(0, 0));
}

}  // namespace csvgd
