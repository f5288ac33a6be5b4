#pragma once

#include "spasm/problems.hpp"
#include "spasm/robot.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spasm {

struct TrajOptConfig {
  int waypoints{1};     // K_waypoint
  int interp{8};        // K_interp
  double w_start{100.0};
  double w_arm{1.0};
  double w_block{1.0};
  double mu0{10.0};
  double beta{2.0};
  double mu_max{1e6};
  int outer_iters{20};
  // Extra outer iterations spent shortening the path once some particle
  // is feasible (still bounded by outer_iters).
  int polish_iters{2};
  int inner_steps{50};
  double lr_start{0.05};
  double lr_end{0.005};
  // Largest joint-space move of one waypoint per inner step; decays with
  // the learning rate.
  double max_step{0.2};
  // Longest allowed joint-space edge between consecutive waypoints (0 =
  // unbounded). Collisions are only checked at waypoints, so this keeps
  // the path from stepping over thin obstacles.
  double max_edge{0.25};
  // Height of the approach and retreat knots above each pick and place
  // (0 = none). Each adds one interpolated leg per segment.
  double clearance{0.0};
  // Contact depth forgiven between a carried object and other objects.
  // Tight packings leave neighbours touching at the final pose, so the
  // last stretch of a place motion cannot be fully clear of them.
  double contact_tolerance{0.0};
  double epsilon{1e-3};       // penetration / placement tolerance
  double align_tol{0.05};     // endpoint grasp alignment tolerance
  std::size_t particles{16};  // trajectory particles optimized together
  std::uint64_t seed{0};
  IkConfig ik;

  // Throws std::invalid_argument naming the violated bound.
  void validate() const;
  // Waypoints per segment for endpoints with (`approach`) or without
  // approach knots.
  int horizon(bool approach = false) const {
    return interp * (waypoints + 1 + (approach ? 2 : 0)) + 1;
  }
};

// Segments of T x dof waypoints stored contiguously (segment, t, joint).
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t segments, std::size_t horizon, std::size_t dof);

  std::size_t segments() const { return segments_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t dof() const { return dof_; }

  std::span<double> waypoint(std::size_t s, std::size_t t) {
    return {q_.data() + (s * horizon_ + t) * dof_, dof_};
  }
  std::span<const double> waypoint(std::size_t s, std::size_t t) const {
    return {q_.data() + (s * horizon_ + t) * dof_, dof_};
  }
  JointVector joints(std::size_t s, std::size_t t) const;
  void set_joints(std::size_t s, std::size_t t, const JointVector& q);

  std::vector<double>& data() { return q_; }
  const std::vector<double>& data() const { return q_; }

  // Object carried during segment s, or -1.
  std::vector<int> attached;

 private:
  std::size_t segments_{0};
  std::size_t horizon_{0};
  std::size_t dof_{0};
  std::vector<double> q_;
};

// What stage 2 plans against: a pick-and-place problem (one segment per
// object, endpoints free) or a single point-to-point motion (pinned ends).
struct TrajTask {
  const KinematicChain* chain{nullptr};
  const PlacementProblem* placement{nullptr};
  const MotionProblem* motion{nullptr};
  GraspSpec grasp;

  std::size_t segments() const;
  bool pinned() const { return motion != nullptr; }
};

struct Endpoints {
  std::vector<JointVector> pick;   // per segment, t = 0
  std::vector<JointVector> place;  // per segment, t = T
  // Optional knots `clearance` above the pick and place grasps.
  std::vector<JointVector> pick_above;
  std::vector<JointVector> place_above;
  bool has_approach() const { return !pick_above.empty(); }
};

struct LiftResult {
  std::vector<Endpoints> particles;
  std::vector<std::size_t> source;  // stage-1 index of each kept particle
  std::size_t dropped{0};
  bool failed() const { return particles.empty(); }
};

// IK for the pick and place grasp of every object; particles with any
// unreachable endpoint are dropped.
LiftResult lift_placements(const TrajTask& task,
                           std::span<const std::vector<Pose>> placements,
                           const TrajOptConfig& config, std::uint64_t seed);

// Piecewise-linear path through [start, K_waypoint uniform samples, goal],
// K_interp even steps per leg. `stream` seeds the waypoint draws; with
// `straight` the intermediate knots lie on the start-goal segment instead.
Trajectory init_trajectory(const TrajTask& task, const Endpoints& ends,
                           const TrajOptConfig& config, std::uint64_t stream,
                           bool straight = false);
// Particle 0 starts straight, the rest from random waypoints.
std::vector<Trajectory> init_trajectories(const TrajTask& task,
                                          std::span<const Endpoints> ends,
                                          const TrajOptConfig& config,
                                          std::size_t count);

// Objects placed by a trajectory: fk of each segment's last waypoint.
std::vector<Pose> placed_poses(const TrajTask& task, const Trajectory& traj);

struct TrajCost {
  double objective{0.0};    // path length + w_start * alignment
  double path_length{0.0};
  double start_cost{0.0};   // C_start summed over segments (unweighted)
  // [placement, collision of segment 0, ..., segment S-1, edge excess];
  // all >= 0.
  std::vector<double> constraints;
  double arm_collision{0.0};    // C_arm (unweighted)
  double block_collision{0.0};  // C_block (unweighted)
};

struct TrajGradient {
  std::vector<double> objective;
  std::vector<std::vector<double>> constraints;
};

// Evaluates cost terms; fills `grad` (same layout as traj.data()) when given.
TrajCost trajectory_cost(const Trajectory& traj, const TrajTask& task,
                         const TrajOptConfig& config, TrajGradient* grad = nullptr);

// objective + lambda . c + mu/2 |c|^2 and its gradient (pinned endpoints
// receive zero gradient).
double al_value(const Trajectory& traj, const TrajTask& task,
                const TrajOptConfig& config, std::span<const double> lambda,
                double mu, std::vector<double>* grad = nullptr);

struct Validation {
  bool feasible{false};
  double max_violation{0.0};
  double max_penetration{0.0};
  double joint_violation{0.0};
  double alignment_error{0.0};
  double placement_cost{0.0};
  double longest_edge{0.0};
};

// Recomputes feasibility from scratch with its own loops.
Validation validate(const Trajectory& traj, const TrajTask& task,
                    const TrajOptConfig& config);

struct AlReport {
  bool success{false};
  int outer_iters{0};
  std::vector<double> mu;                   // per outer iteration, before update
  std::vector<std::vector<double>> lambda;  // per outer iteration, after update
  std::vector<double> max_violation;        // per outer iteration
  std::vector<double> objective;            // per outer iteration
  // Constraint vector that fed each multiplier update.
  std::vector<std::vector<double>> constraints;
  // Objective of the kept feasible iterate after each outer iteration
  // (NaN while none).
  std::vector<double> kept_objective;
  double best_violation{0.0};
  double wall_ms{0.0};
  std::size_t feasible_particles{0};
  std::size_t chosen{0};  // index of the returned particle
};

struct AlResult {
  bool success{false};
  Trajectory trajectory;
  TrajCost cost;
  Validation validation;
  AlReport report;  // histories follow the returned particle
};

// Augmented Lagrangian over a batch of trajectories (modified in place).
AlResult solve_al(std::vector<Trajectory>& batch, const TrajTask& task,
                  const TrajOptConfig& config);

// `segment, t, q1..qn` lines after a `#` summary header.
void write_trajectory(std::ostream& os, const Trajectory& traj, const TrajCost& cost,
                      const Validation& v);

}  // namespace spasm
