#include "spasm/trajopt.hpp"

#include "spasm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace spasm {

void TrajOptConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (waypoints < 0) fail("K_waypoint must be >= 0");
  if (interp < 1) fail("K_interp must be >= 1");
  if (!(mu0 > 0.0)) fail("mu0 must be > 0");
  if (!(beta > 1.0)) fail("beta must be > 1");
  if (outer_iters < 1) fail("outer_iters must be >= 1");
  if (polish_iters < 0) fail("polish_iters must be >= 0");
  if (inner_steps < 1) fail("inner_steps must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) fail("inner learning rates must be > 0");
  if (!(epsilon > 0.0)) fail("trajectory epsilon must be > 0");
  if (particles < 1) fail("trajectory particles must be >= 1");
  if (w_start < 0.0 || w_arm < 0.0 || w_block < 0.0) fail("weights must be >= 0");
  if (max_edge < 0.0) fail("max_edge must be >= 0");
  if (clearance < 0.0) fail("clearance must be >= 0");
  if (contact_tolerance < 0.0) fail("contact_tolerance must be >= 0");
}

Trajectory::Trajectory(std::size_t segments, std::size_t horizon, std::size_t dof)
    : attached(segments, -1),
      segments_(segments),
      horizon_(horizon),
      dof_(dof),
      q_(segments * horizon * dof, 0.0) {}

JointVector Trajectory::joints(std::size_t s, std::size_t t) const {
  const auto w = waypoint(s, t);
  return Eigen::Map<const JointVector>(w.data(), static_cast<Eigen::Index>(dof_));
}

void Trajectory::set_joints(std::size_t s, std::size_t t, const JointVector& q) {
  auto w = waypoint(s, t);
  std::copy(q.data(), q.data() + dof_, w.begin());
}

std::size_t TrajTask::segments() const {
  if (motion != nullptr) return 1;
  return placement != nullptr ? placement->num_objects() : 0;
}

namespace {

void check_task(const TrajTask& task) {
  if (task.chain == nullptr) throw std::invalid_argument("trajectory task has no robot");
  if ((task.placement == nullptr) == (task.motion == nullptr)) {
    throw std::invalid_argument("trajectory task needs exactly one of placement or motion");
  }
}

// Object held in the gripper whose end effector sits at `ee`.
Pose held_pose(const FkResult& f, const GraspSpec& grasp) {
  return object_from_grasp(f.ee, grasp);
}

// Chains a gradient on the held object's pose back to the joints.
void object_pose_to_q(const FkResult& f, const GraspSpec& grasp, const PoseGradient& pg,
                      std::span<double> grad_q) {
  const double psi = f.ee.yaw - grasp.yaw_offset;
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  const Vec3& a = grasp.approach;
  // obj.xy = ee.xy - R(psi) a.xy
  const double dx = s * a.x() + c * a.y();
  const double dy = -(c * a.x() - s * a.y());
  const double g_yaw = pg.yaw + pg.x * dx + pg.y * dy;
  const int last = static_cast<int>(f.joint_axes.size()) - 1;
  accumulate_point_gradient(f, last, f.tool.translation(), Vec3(pg.x, pg.y, pg.z), grad_q);
  if (g_yaw != 0.0) {
    const Eigen::RowVectorXd yg = yaw_gradient(f);
    for (Eigen::Index j = 0; j < yg.size(); ++j) {
      grad_q[static_cast<std::size_t>(j)] += g_yaw * yg[j];
    }
  }
}

// d(axis_misalignment)/dq scaled by `w`.
void misalignment_to_q(const FkResult& f, const Vec3& axis, double w,
                       std::span<double> grad_q) {
  const Vec3 z = f.tool.linear().col(2);
  for (std::size_t j = 0; j < f.joint_axes.size(); ++j) {
    grad_q[j] -= w * f.joint_axes[j].cross(z).dot(axis);
  }
}

std::span<double> slot(std::vector<double>& flat, const Trajectory& traj,
                       std::size_t s, std::size_t t) {
  return {flat.data() + (s * traj.horizon() + t) * traj.dof(), traj.dof()};
}

const WorldSpheres& static_obstacles(const TrajTask& task) {
  return task.motion != nullptr ? task.motion->obstacles : task.placement->obstacles();
}

}  // namespace

// ---------------------------------------------------------------- lifting

LiftResult lift_placements(const TrajTask& task,
                           std::span<const std::vector<Pose>> placements,
                           const TrajOptConfig& config, std::uint64_t seed) {
  const IkConfig& ik = config.ik;
  check_task(task);
  if (task.placement == nullptr) throw std::invalid_argument("lift_placements needs a placement problem");
  const PlacementProblem& problem = *task.placement;
  const std::size_t n = problem.num_objects();
  if (problem.initial_poses().size() != n) {
    throw std::invalid_argument("lift_placements: problem has no initial object poses");
  }
  std::vector<Pose> pick_targets;
  for (const Pose& p : problem.initial_poses()) pick_targets.push_back(grasp_pose(p, task.grasp));
  const auto picks = ik_solve_batch(*task.chain, pick_targets, ik, mix_seed(seed ^ 0x5049434bULL));

  std::vector<Pose> place_targets;
  place_targets.reserve(placements.size() * n);
  for (const auto& poses : placements) {
    if (poses.size() != n) throw std::invalid_argument("lift_placements: pose count mismatch");
    for (const Pose& p : poses) place_targets.push_back(grasp_pose(p, task.grasp));
  }
  const auto places = ik_solve_batch(*task.chain, place_targets, ik, seed);

  LiftResult out;
  const bool picks_ok =
      std::all_of(picks.begin(), picks.end(), [](const IkResult& r) { return r.reachable; });
  for (std::size_t p = 0; p < placements.size(); ++p) {
    bool ok = picks_ok;
    for (std::size_t b = 0; b < n && ok; ++b) ok = places[p * n + b].reachable;
    if (!ok) {
      ++out.dropped;
      continue;
    }
    Endpoints e;
    for (std::size_t b = 0; b < n; ++b) {
      e.pick.push_back(picks[b].q);
      e.place.push_back(places[p * n + b].q);
    }
    if (config.clearance > 0.0) {
      const Vec3 up(0.0, 0.0, config.clearance);
      for (std::size_t b = 0; b < n && ok; ++b) {
        Pose above = pick_targets[b];
        above.z += up.z();
        const IkResult a = ik_refine(*task.chain, above, ik, e.pick[b]);
        Pose above_place = place_targets[p * n + b];
        above_place.z += up.z();
        const IkResult c = ik_refine(*task.chain, above_place, ik, e.place[b]);
        ok = a.reachable && c.reachable;
        e.pick_above.push_back(a.q);
        e.place_above.push_back(c.q);
      }
      if (!ok) {
        ++out.dropped;
        continue;
      }
    }
    out.particles.push_back(std::move(e));
    out.source.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------- init

Trajectory init_trajectory(const TrajTask& task, const Endpoints& ends,
                           const TrajOptConfig& config, std::uint64_t stream,
                           bool straight) {
  check_task(task);
  const KinematicChain& chain = *task.chain;
  const std::size_t segs = task.segments();
  const std::size_t dof = chain.dof();
  const auto horizon = static_cast<std::size_t>(config.horizon(ends.has_approach()));
  if (ends.pick.size() != segs || ends.place.size() != segs) {
    throw std::invalid_argument("init_trajectory: endpoint count mismatch");
  }
  Trajectory traj(segs, horizon, dof);
  for (std::size_t s = 0; s < segs; ++s) {
    traj.attached[s] = task.placement != nullptr ? static_cast<int>(s) : -1;
    std::mt19937_64 rng(stream_seed(stream, s, 0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<JointVector> knots{ends.pick[s]};
    if (ends.has_approach()) knots.push_back(ends.pick_above[s]);
    const JointVector& last = ends.has_approach() ? ends.place_above[s] : ends.place[s];
    for (int k = 0; k < config.waypoints; ++k) {
      if (straight) {
        const double u = static_cast<double>(k + 1) / (config.waypoints + 1);
        knots.push_back(knots.front() + u * (last - knots.front()));
        continue;
      }
      JointVector w(static_cast<Eigen::Index>(dof));
      for (std::size_t j = 0; j < dof; ++j) {
        const Joint& jt = chain.joints()[j];
        w[static_cast<Eigen::Index>(j)] = jt.lower + unit(rng) * (jt.upper - jt.lower);
      }
      knots.push_back(w);
    }
    if (ends.has_approach()) knots.push_back(ends.place_above[s]);
    knots.push_back(ends.place[s]);
    std::size_t t = 0;
    for (std::size_t leg = 0; leg + 1 < knots.size(); ++leg) {
      for (int k = 0; k < config.interp; ++k) {
        const double u = static_cast<double>(k) / config.interp;
        traj.set_joints(s, t++, knots[leg] + u * (knots[leg + 1] - knots[leg]));
      }
    }
    traj.set_joints(s, t, knots.back());
  }
  return traj;
}

std::vector<Trajectory> init_trajectories(const TrajTask& task,
                                          std::span<const Endpoints> ends,
                                          const TrajOptConfig& config,
                                          std::size_t count) {
  if (ends.empty()) throw std::invalid_argument("init_trajectories: no endpoints");
  std::vector<Trajectory> out(count);
  parallel_for(count, [&](std::size_t i) {
    out[i] = init_trajectory(task, ends[i % ends.size()], config,
                             stream_seed(config.seed, 1, i), i == 0);
  });
  return out;
}

std::vector<Pose> placed_poses(const TrajTask& task, const Trajectory& traj) {
  std::vector<Pose> out;
  if (task.placement == nullptr) return out;
  const std::size_t last = traj.horizon() - 1;
  for (std::size_t s = 0; s < traj.segments(); ++s) {
    out.push_back(held_pose(fk(*task.chain, traj.joints(s, last)), task.grasp));
  }
  return out;
}

// ---------------------------------------------------------------- cost

TrajCost trajectory_cost(const Trajectory& traj, const TrajTask& task,
                         const TrajOptConfig& config, TrajGradient* grad) {
  check_task(task);
  const std::size_t S = traj.segments();
  const std::size_t T = traj.horizon();
  const std::size_t dof = traj.dof();
  const std::size_t flat = traj.data().size();
  const bool want = grad != nullptr;
  if (want) {
    grad->objective.assign(flat, 0.0);
    grad->constraints.assign(S + 2, std::vector<double>(flat, 0.0));
  }

  TrajCost out;
  out.constraints.assign(S + 2, 0.0);

  // Forward kinematics of every waypoint.
  std::vector<FkResult> fks(S * T);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) fks[s * T + t] = fk(*task.chain, traj.joints(s, t));
  }
  const auto F = [&](std::size_t s, std::size_t t) -> const FkResult& { return fks[s * T + t]; };

  // Path length.
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const auto a = traj.waypoint(s, t);
      const auto b = traj.waypoint(s, t + 1);
      double d2 = 0.0;
      for (std::size_t j = 0; j < dof; ++j) d2 += (b[j] - a[j]) * (b[j] - a[j]);
      const double d = std::sqrt(d2);
      out.path_length += d;
      const bool long_edge = config.max_edge > 0.0 && d > config.max_edge;
      if (long_edge) out.constraints[S + 1] += d - config.max_edge;
      if (want && d > 0.0) {
        auto ga = slot(grad->objective, traj, s, t);
        auto gb = slot(grad->objective, traj, s, t + 1);
        auto ea = slot(grad->constraints[S + 1], traj, s, t);
        auto eb = slot(grad->constraints[S + 1], traj, s, t + 1);
        for (std::size_t j = 0; j < dof; ++j) {
          const double u = (b[j] - a[j]) / d;
          ga[j] -= u;
          gb[j] += u;
          if (long_edge) {
            ea[j] -= u;
            eb[j] += u;
          }
        }
      }
    }
  }

  // Grasp alignment at both ends of every pick-and-place segment.
  const PlacementProblem* problem = task.placement;
  if (problem != nullptr && problem->initial_poses().size() == S) {
    const Vec3& axis = task.grasp.tool_axis;
    for (std::size_t s = 0; s < S; ++s) {
      const FkResult& f0 = F(s, 0);
      const Pose target = grasp_pose(problem->initial_poses()[s], task.grasp);
      const Vec3 e = f0.tool.translation() - target.translation();
      const double c0 = e.squaredNorm() + 2.0 * axis_misalignment(f0.tool, axis);
      const FkResult& fT = F(s, T - 1);
      const double cT = 2.0 * axis_misalignment(fT.tool, axis);
      out.start_cost += c0 + cT;
      if (want) {
        const double w = config.w_start;
        auto g0 = slot(grad->objective, traj, s, 0);
        accumulate_point_gradient(f0, static_cast<int>(dof) - 1, f0.tool.translation(),
                                  2.0 * w * e, g0);
        misalignment_to_q(f0, axis, 2.0 * w, g0);
        misalignment_to_q(fT, axis, 2.0 * w, slot(grad->objective, traj, s, T - 1));
      }
    }
  }
  out.objective = out.path_length + config.w_start * out.start_cost;

  // Placement constraint on the poses implied by each final waypoint.
  std::vector<Pose> placed;
  if (problem != nullptr) {
    for (std::size_t s = 0; s < S; ++s) placed.push_back(held_pose(F(s, T - 1), task.grasp));
    std::vector<PoseGradient> pg(S);
    out.constraints[0] = problem->placement_cost(
        placed, CostMode::quadratic, want ? std::span<PoseGradient>(pg) : std::span<PoseGradient>());
    if (want) {
      for (std::size_t s = 0; s < S; ++s) {
        object_pose_to_q(F(s, T - 1), task.grasp, pg[s], slot(grad->constraints[0], traj, s, T - 1));
      }
    }
  }

  // Collisions. Segment s moves among static obstacles, objects already
  // placed by earlier segments, and objects still waiting to be picked.
  const WorldSpheres& statics = static_obstacles(task);
  std::vector<WorldSpheres> placed_world(S);
  std::vector<WorldSpheres> waiting_world(S);
  if (problem != nullptr) {
    for (std::size_t b = 0; b < S; ++b) {
      placed_world[b] = place(problem->object_geometry(b), placed[b]);
      if (problem->initial_poses().size() == S) {
        waiting_world[b] = place(problem->object_geometry(b), problem->initial_poses()[b]);
      }
    }
  }

  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double>* gc = want ? &grad->constraints[s + 1] : nullptr;
    double arm = 0.0;
    double held = 0.0;
    // Gradient buffers for placed objects (pose of object b < s).
    std::vector<std::vector<Vec3>> placed_cg(s);
    if (want) {
      for (std::size_t b = 0; b < s; ++b) placed_cg[b].assign(placed_world[b].size(), Vec3::Zero());
    }

    const auto against_all = [&](const WorldSpheres& moving, std::span<Vec3> g_moving,
                                 double weight) {
      double sum = 0.0;
      if (statics.size() > 0) {
        sum += pen_sets_accumulate(moving, statics, CostMode::linear, g_moving, {}, weight);
      }
      for (std::size_t b = 0; b < s; ++b) {
        sum += pen_sets_accumulate(moving, placed_world[b], CostMode::linear, g_moving,
                                   want ? std::span<Vec3>(placed_cg[b]) : std::span<Vec3>(),
                                   weight);
      }
      for (std::size_t b = s + 1; b < S; ++b) {
        if (waiting_world[b].size() == 0) continue;
        sum += pen_sets_accumulate(moving, waiting_world[b], CostMode::linear, g_moving, {},
                                   weight);
      }
      return sum;
    };

    for (std::size_t t = 0; t < T; ++t) {
      const FkResult& f = F(s, t);
      std::vector<Vec3> g_arm(want ? f.spheres.size() : 0, Vec3::Zero());
      arm += against_all(f.spheres, g_arm, config.w_arm);
      if (want) {
        auto gq = slot(*gc, traj, s, t);
        for (std::size_t k = 0; k < f.spheres.size(); ++k) {
          if (g_arm[k].isZero()) continue;
          accumulate_point_gradient(f, f.sphere_link[k], f.spheres.centers[k], g_arm[k], gq);
        }
      }
      const int obj = traj.attached[s];
      if (obj < 0 || problem == nullptr || t == 0 || t + 1 == T) continue;
      const Pose hp = held_pose(f, task.grasp);
      WorldSpheres hw = place(problem->object_geometry(static_cast<std::size_t>(obj)), hp);
      for (double& r : hw.radii) r = std::max(0.0, r - config.contact_tolerance);
      std::vector<Vec3> g_held(want ? hw.size() : 0, Vec3::Zero());
      held += against_all(hw, g_held, config.w_block);
      if (want) {
        const PoseGradient pg = pose_gradient(hp, hw.centers, g_held);
        object_pose_to_q(f, task.grasp, pg, slot(*gc, traj, s, t));
      }
    }
    if (want) {
      for (std::size_t b = 0; b < s; ++b) {
        const PoseGradient pg = pose_gradient(placed[b], placed_world[b].centers, placed_cg[b]);
        object_pose_to_q(F(b, T - 1), task.grasp, pg, slot(*gc, traj, b, T - 1));
      }
    }
    out.constraints[s + 1] = arm + held;
    if (config.w_arm > 0.0) out.arm_collision += arm / config.w_arm;
    if (config.w_block > 0.0) out.block_collision += held / config.w_block;
  }
  return out;
}

double al_value(const Trajectory& traj, const TrajTask& task, const TrajOptConfig& config,
                std::span<const double> lambda, double mu, std::vector<double>* grad) {
  TrajGradient g;
  const TrajCost c = trajectory_cost(traj, task, config, grad != nullptr ? &g : nullptr);
  double value = c.objective;
  for (std::size_t i = 0; i < c.constraints.size(); ++i) {
    value += lambda[i] * c.constraints[i] + 0.5 * mu * c.constraints[i] * c.constraints[i];
  }
  if (grad != nullptr) {
    *grad = g.objective;
    for (std::size_t i = 0; i < c.constraints.size(); ++i) {
      const double w = lambda[i] + mu * c.constraints[i];
      if (w == 0.0) continue;
      const auto& gi = g.constraints[i];
      for (std::size_t k = 0; k < grad->size(); ++k) (*grad)[k] += w * gi[k];
    }
    if (task.pinned()) {
      const std::size_t T = traj.horizon();
      for (std::size_t s = 0; s < traj.segments(); ++s) {
        for (std::size_t t : {std::size_t{0}, T - 1}) {
          auto w = slot(*grad, traj, s, t);
          std::fill(w.begin(), w.end(), 0.0);
        }
      }
    }
  }
  return value;
}

// ---------------------------------------------------------------- validate

namespace {

struct Ball {
  Vec3 c;
  double r;
};

double max_pen(const std::vector<Ball>& a, const std::vector<Ball>& b) {
  double worst = 0.0;
  for (const Ball& p : a) {
    for (const Ball& q : b) {
      worst = std::max(worst, p.r + q.r - (p.c - q.c).norm());
    }
  }
  return worst;
}

std::vector<Ball> balls(const SphereSet& set, const Pose& pose) {
  std::vector<Ball> out;
  const Eigen::AngleAxisd rot(pose.yaw, Vec3::UnitZ());
  for (std::size_t k = 0; k < set.size(); ++k) {
    out.push_back({rot * set.centers()[k] + pose.translation(), set.radii()[k]});
  }
  return out;
}

std::vector<Ball> balls(const WorldSpheres& w) {
  std::vector<Ball> out;
  for (std::size_t k = 0; k < w.size(); ++k) out.push_back({w.centers[k], w.radii[k]});
  return out;
}

// Arm spheres from an explicit product of homogeneous transforms.
std::vector<Ball> arm_balls(const KinematicChain& chain, const JointVector& q,
                            Eigen::Matrix4d* tool_out) {
  Eigen::Matrix4d M = chain.base().matrix();
  std::vector<Ball> out;
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const Joint& j = chain.joints()[i];
    Eigen::Matrix4d step = Eigen::Matrix4d::Identity();
    step.block<3, 3>(0, 0) = Eigen::AngleAxisd(q[static_cast<Eigen::Index>(i)], j.axis).toRotationMatrix();
    step.block<3, 1>(0, 3) = j.offset;
    M = M * step;
    const LinkSpheres& ls = chain.link_spheres()[i];
    for (std::size_t k = 0; k < ls.centers.size(); ++k) {
      const Eigen::Vector4d h = M * ls.centers[k].homogeneous();
      out.push_back({h.head<3>(), ls.radii[k]});
    }
  }
  if (tool_out != nullptr) *tool_out = M * chain.tool().matrix();
  return out;
}

Pose pose_from_tool(const Eigen::Matrix4d& tool, const GraspSpec& grasp) {
  const Vec3 p = tool.block<3, 1>(0, 3);
  const double yaw = std::atan2(tool(1, 0), tool(0, 0)) - grasp.yaw_offset;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const Vec3& a = grasp.approach;
  return Pose{p.x() - (c * a.x() - s * a.y()), p.y() - (s * a.x() + c * a.y()),
              p.z() - a.z(), wrap_angle(yaw)};
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

Validation validate(const Trajectory& traj, const TrajTask& task, const TrajOptConfig& config) {
  check_task(task);
  const KinematicChain& chain = *task.chain;
  const std::size_t S = traj.segments();
  const std::size_t T = traj.horizon();
  Validation v;

  for (double q : traj.data()) {
    if (!std::isfinite(q)) {
      v.max_violation = std::numeric_limits<double>::infinity();
      return v;
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto w = traj.waypoint(s, t);
      for (std::size_t j = 0; j < chain.dof(); ++j) {
        const Joint& jt = chain.joints()[j];
        v.joint_violation = std::max({v.joint_violation, jt.lower - w[j], w[j] - jt.upper});
      }
      if (t > 0) {
        v.longest_edge = std::max(v.longest_edge, (traj.joints(s, t) - traj.joints(s, t - 1)).norm());
      }
    }
  }
  const double edge_excess =
      config.max_edge > 0.0 ? std::max(0.0, v.longest_edge - config.max_edge) : 0.0;

  std::vector<Eigen::Matrix4d> tools(S * T);
  std::vector<std::vector<Ball>> arms(S * T);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      arms[s * T + t] = arm_balls(chain, traj.joints(s, t), &tools[s * T + t]);
    }
  }
  const std::vector<Ball> statics = balls(
      task.motion != nullptr ? task.motion->obstacles : task.placement->obstacles());

  const PlacementProblem* problem = task.placement;
  std::vector<Pose> placed;
  if (problem != nullptr) {
    for (std::size_t s = 0; s < S; ++s) placed.push_back(pose_from_tool(tools[s * T + T - 1], task.grasp));
    const bool has_initial = problem->initial_poses().size() == S;
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<Ball> others = statics;
      for (std::size_t b = 0; b < S; ++b) {
        if (b == s) continue;
        if (b < s) {
          const auto bb = balls(problem->object_geometry(b), placed[b]);
          others.insert(others.end(), bb.begin(), bb.end());
        } else if (has_initial) {
          const auto bb = balls(problem->object_geometry(b), problem->initial_poses()[b]);
          others.insert(others.end(), bb.begin(), bb.end());
        }
      }
      for (std::size_t t = 0; t < T; ++t) {
        v.max_penetration = std::max(v.max_penetration, max_pen(arms[s * T + t], others));
        if (t == 0 || t + 1 == T) continue;
        auto held = balls(problem->object_geometry(s), pose_from_tool(tools[s * T + t], task.grasp));
        for (Ball& b : held) b.r = std::max(0.0, b.r - config.contact_tolerance);
        v.max_penetration = std::max(v.max_penetration, max_pen(held, others));
      }
      const Vec3 z0 = tools[s * T].block<3, 1>(0, 2);
      const Vec3 zT = tools[s * T + T - 1].block<3, 1>(0, 2);
      double align = std::max(angle_between(z0, task.grasp.tool_axis),
                              angle_between(zT, task.grasp.tool_axis));
      if (has_initial) {
        const Pose target = grasp_pose(problem->initial_poses()[s], task.grasp);
        align = std::max(align, (Vec3(tools[s * T].block<3, 1>(0, 3)) - target.translation()).norm());
      }
      v.alignment_error = std::max(v.alignment_error, align);
    }
    v.placement_cost = check_placement(*problem, placed).sum_squares;
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      v.max_penetration = std::max(v.max_penetration, max_pen(arms[t], statics));
    }
    v.alignment_error = std::max((traj.joints(0, 0) - task.motion->start).cwiseAbs().maxCoeff(),
                                 (traj.joints(0, T - 1) - task.motion->goal).cwiseAbs().maxCoeff());
  }
  v.max_violation = std::max({v.max_penetration, v.joint_violation, v.placement_cost, edge_excess});
  v.feasible = v.max_penetration < config.epsilon && v.joint_violation <= 0.0 &&
               v.placement_cost < config.epsilon && v.alignment_error < config.align_tol &&
               edge_excess < config.epsilon;
  return v;
}

// ---------------------------------------------------------------- solve

namespace {

struct AlParticle {
  std::vector<double> lambda;
  double mu{0.0};
  double prev_violation{std::numeric_limits<double>::infinity()};
  bool feasible{false};
  TrajCost cost;
  Validation validation;
  std::vector<double> mu_hist;
  std::vector<std::vector<double>> lambda_hist;
  std::vector<double> viol_hist;
  std::vector<double> obj_hist;
  std::vector<std::vector<double>> c_hist;
  std::vector<double> kept_hist;
  // Best feasible iterate so far; later feasible iterates replace it only
  // if their objective is no larger.
  std::optional<Trajectory> kept;
  TrajCost kept_cost;
  double obj_kept() const { return kept_cost.objective; }
};

void inner_descent(Trajectory& traj, const TrajTask& task, const TrajOptConfig& config,
                   const AlParticle& p) {
  const KinematicChain& chain = *task.chain;
  const std::size_t dof = traj.dof();
  std::vector<double> grad;
  for (int k = 0; k < config.inner_steps; ++k) {
    const double u = config.inner_steps > 1 ? static_cast<double>(k) / (config.inner_steps - 1) : 0.0;
    const double lr = config.lr_start + u * (config.lr_end - config.lr_start);
    const double max_step = config.max_step * lr / config.lr_start;
    al_value(traj, task, config, p.lambda, p.mu, &grad);
    for (std::size_t s = 0; s < traj.segments(); ++s) {
      for (std::size_t t = 0; t < traj.horizon(); ++t) {
        auto w = traj.waypoint(s, t);
        const double* g = grad.data() + (s * traj.horizon() + t) * dof;
        double n2 = 0.0;
        for (std::size_t j = 0; j < dof; ++j) n2 += g[j] * g[j];
        if (!std::isfinite(n2)) continue;
        double scale = lr;
        const double step = lr * std::sqrt(n2);
        if (step > max_step) scale *= max_step / step;
        for (std::size_t j = 0; j < dof; ++j) {
          const Joint& jt = chain.joints()[j];
          w[j] = std::clamp(w[j] - scale * g[j], jt.lower, jt.upper);
        }
      }
    }
  }
}

}  // namespace

AlResult solve_al(std::vector<Trajectory>& batch, const TrajTask& task,
                  const TrajOptConfig& config) {
  check_task(task);
  config.validate();
  if (batch.empty()) throw std::invalid_argument("solve_al: empty batch");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t P = batch.size();
  const std::size_t C = task.segments() + 2;

  std::vector<AlParticle> state(P);
  parallel_for(P, [&](std::size_t i) {
    state[i].lambda.assign(C, 0.0);
    state[i].mu = config.mu0;
    state[i].cost = trajectory_cost(batch[i], task, config);
    state[i].validation = validate(batch[i], task, config);
    if (state[i].validation.feasible) {
      state[i].kept = batch[i];
      state[i].kept_cost = state[i].cost;
      state[i].feasible = true;
    }
  });

  int outer = 0;
  int polish = -1;  // iterations left once a particle is feasible
  for (; outer < config.outer_iters && polish != 0; ++outer) {
    parallel_for(P, [&](std::size_t i) {
      AlParticle& p = state[i];
      inner_descent(batch[i], task, config, p);
      p.cost = trajectory_cost(batch[i], task, config);
      const double viol = *std::max_element(p.cost.constraints.begin(), p.cost.constraints.end());
      p.mu_hist.push_back(p.mu);
      for (std::size_t c = 0; c < C; ++c) p.lambda[c] += p.mu * p.cost.constraints[c];
      p.lambda_hist.push_back(p.lambda);
      p.viol_hist.push_back(viol);
      p.obj_hist.push_back(p.cost.objective);
      p.c_hist.push_back(p.cost.constraints);
      if (viol > 0.1 * p.prev_violation) p.mu = std::min(p.mu * config.beta, config.mu_max);
      p.prev_violation = viol;
      const Validation v = validate(batch[i], task, config);
      if (v.feasible && (!p.kept || p.cost.objective <= p.obj_kept())) {
        p.kept = batch[i];
        p.validation = v;
        p.kept_cost = p.cost;
      } else if (p.kept) {
        batch[i] = *p.kept;
        p.cost = p.kept_cost;
      } else {
        p.validation = v;
      }
      p.feasible = p.kept.has_value();
      p.kept_hist.push_back(p.kept ? p.obj_kept() : std::numeric_limits<double>::quiet_NaN());
    });
    if (polish > 0) {
      --polish;
    } else if (polish < 0) {
      for (const AlParticle& p : state) {
        if (p.feasible) polish = config.polish_iters;
      }
    }
  }

  AlResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const AlParticle& a = state[i];
    const AlParticle& b = state[best];
    if (a.feasible != b.feasible) {
      if (a.feasible) best = i;
    } else if (a.feasible ? a.cost.objective < b.cost.objective
                          : a.validation.max_violation < b.validation.max_violation) {
      best = i;
    }
    out.report.feasible_particles += a.feasible ? 1 : 0;
  }
  const AlParticle& chosen = state[best];
  out.success = chosen.feasible;
  out.trajectory = batch[best];
  out.cost = chosen.cost;
  out.validation = chosen.validation;
  out.report.success = chosen.feasible;
  out.report.outer_iters = outer;
  out.report.mu = chosen.mu_hist;
  out.report.lambda = chosen.lambda_hist;
  out.report.max_violation = chosen.viol_hist;
  out.report.objective = chosen.obj_hist;
  out.report.constraints = chosen.c_hist;
  out.report.kept_objective = chosen.kept_hist;
  out.report.best_violation = chosen.validation.max_violation;
  out.report.chosen = best;
  out.report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_trajectory(std::ostream& os, const Trajectory& traj, const TrajCost& cost,
                      const Validation& v) {
  char buf[64];
  const auto num = [&buf](double x) {
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
  };
  os << "# segments " << traj.segments() << " horizon " << traj.horizon() << " dof "
     << traj.dof() << "\n";
  os << "# path_length " << num(cost.path_length) << "\n";
  os << "# max_violation " << num(v.max_violation) << "\n";
  os << "# feasible " << (v.feasible ? 1 : 0) << "\n";
  for (std::size_t s = 0; s < traj.segments(); ++s) {
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
      os << s << ", " << t;
      for (double q : traj.waypoint(s, t)) os << ", " << num(q);
      os << "\n";
    }
  }
}

}  // namespace spasm
