#pragma once

#include "spasm/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spasm {

using JointVector = Eigen::VectorXd;

struct Joint {
  Vec3 axis{Vec3::UnitZ()};     // unit, in the joint frame
  Vec3 offset{Vec3::Zero()};    // parent frame -> joint frame translation
  double lower{-3.14};
  double upper{3.14};
};

// Link-frame spheres; unlike SphereSet a link may carry none.
struct LinkSpheres {
  std::vector<Vec3> centers;
  std::vector<double> radii;
};

// Serial revolute chain. Frame i = frame(i-1) * Trans(offset_i) * Rot(axis_i, q_i);
// the tool frame is frame(dof) * tool.
class KinematicChain {
 public:
  KinematicChain() = default;
  // Throws std::invalid_argument on bad limits, non-unit axes, or a
  // link_spheres list whose length differs from the joint count.
  KinematicChain(std::vector<Joint> joints, std::vector<LinkSpheres> link_spheres,
                 Eigen::Isometry3d tool = Eigen::Isometry3d::Identity(),
                 Eigen::Isometry3d base = Eigen::Isometry3d::Identity());

  std::size_t dof() const { return joints_.size(); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<LinkSpheres>& link_spheres() const { return link_spheres_; }
  const Eigen::Isometry3d& tool() const { return tool_; }
  const Eigen::Isometry3d& base() const { return base_; }
  std::size_t sphere_count() const { return sphere_count_; }

  // Optional preferred configuration, used as the first IK seed.
  std::optional<JointVector> home;

  bool within_limits(const JointVector& q, double tol = 0.0) const;
  JointVector clamp(const JointVector& q) const;
  double reach() const;  // sum of offset and tool lengths from the base

  // 3-DOF planar arm (all axes world z), links of the given lengths.
  static KinematicChain planar(std::span<const double> lengths,
                               double sphere_radius = 0.05);

 private:
  std::vector<Joint> joints_;
  std::vector<LinkSpheres> link_spheres_;
  Eigen::Isometry3d tool_{Eigen::Isometry3d::Identity()};
  Eigen::Isometry3d base_{Eigen::Isometry3d::Identity()};
  std::size_t sphere_count_{0};
};

struct FkResult {
  Eigen::Isometry3d tool;
  Pose ee;                       // tool position + yaw of the tool x-axis
  WorldSpheres spheres;          // all link spheres, link order
  std::vector<int> sphere_link;  // owning joint index of each sphere
  std::vector<Vec3> joint_origins;  // world, per joint
  std::vector<Vec3> joint_axes;     // world, per joint
  bool within_limits{true};
};

// Throws std::invalid_argument when q has the wrong size.
FkResult fk(const KinematicChain& chain, const JointVector& q);

// 6 x dof geometric Jacobian of the tool frame (rows: linear, angular).
Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const KinematicChain& chain,
                                                  const JointVector& q);

// Adds g . d(point)/dq for a point rigidly attached to joint `link`.
void accumulate_point_gradient(const FkResult& f, int link, const Vec3& point,
                               const Vec3& g, std::span<double> grad_q);

// d(ee.yaw)/dq as a row over joints.
Eigen::RowVectorXd yaw_gradient(const FkResult& f);

// Angle between the tool z-axis and world -z (0 for a top-down tool).
double tool_tilt(const Eigen::Isometry3d& tool);

// Top-down grasp: end-effector offset from the object frame plus yaw rule
// (end-effector yaw = object yaw + yaw_offset).
struct GraspSpec {
  Vec3 approach{0.0, 0.0, 0.05};
  double yaw_offset{0.0};
  // Desired world direction of the tool z-axis while grasping.
  Vec3 tool_axis{0.0, 0.0, -1.0};
  // Throws std::invalid_argument unless approach.z > 0 and tool_axis is unit.
  void validate() const;
};

// 1 - cos(angle between the tool z-axis and `axis`); ~ angle^2 / 2.
double axis_misalignment(const Eigen::Isometry3d& tool, const Vec3& axis);

Pose grasp_pose(const Pose& object, const GraspSpec& grasp);
// Inverse of grasp_pose: where the object sits for a given end-effector pose.
Pose object_from_grasp(const Pose& ee, const GraspSpec& grasp);

struct IkConfig {
  double damping{1e-3};
  int max_iters{200};
  int restarts{16};
  double position_tol{1e-4};
  double yaw_tol{1e-3};
  // Null-space bias toward a top-down tool (redundant chains only).
  bool prefer_top_down{false};
  double tilt_tol{1e-3};
};

struct IkResult {
  bool reachable{false};
  JointVector q;
  double position_error{0.0};
  double yaw_error{0.0};
  double tilt{0.0};
};

// Damped least squares on (position, yaw) from seeds drawn uniformly in
// the joint limits (home first when set). Iterates stay within limits.
IkResult ik_solve(const KinematicChain& chain, const Pose& target,
                  const IkConfig& config, std::uint64_t stream);

// Single descent from `seed`, no restarts.
IkResult ik_refine(const KinematicChain& chain, const Pose& target,
                   const IkConfig& config, const JointVector& seed);

// One result per target; target i uses stream (seed, i).
std::vector<IkResult> ik_solve_batch(const KinematicChain& chain,
                                     std::span<const Pose> targets,
                                     const IkConfig& config, std::uint64_t seed);

}  // namespace spasm
