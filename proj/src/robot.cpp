#include "spasm/robot.hpp"

#include "spasm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace spasm {

KinematicChain::KinematicChain(std::vector<Joint> joints,
                               std::vector<LinkSpheres> link_spheres,
                               Eigen::Isometry3d tool, Eigen::Isometry3d base)
    : joints_(std::move(joints)),
      link_spheres_(std::move(link_spheres)),
      tool_(tool),
      base_(base) {
  if (joints_.empty()) throw std::invalid_argument("chain has no joints");
  if (link_spheres_.size() != joints_.size()) {
    throw std::invalid_argument("link_spheres has " +
                                std::to_string(link_spheres_.size()) +
                                " entries for " + std::to_string(joints_.size()) +
                                " joints");
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const Joint& j = joints_[i];
    if (!(j.lower < j.upper)) {
      throw std::invalid_argument("joint " + std::to_string(i) +
                                  ": lower limit must be below upper limit");
    }
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("joint " + std::to_string(i) +
                                  ": axis is not unit length");
    }
    const LinkSpheres& ls = link_spheres_[i];
    if (ls.centers.size() != ls.radii.size()) {
      throw std::invalid_argument("link " + std::to_string(i) +
                                  ": centers/radii length mismatch");
    }
    for (double r : ls.radii) {
      if (!(r > 0.0)) {
        throw std::invalid_argument("link " + std::to_string(i) +
                                    ": non-positive sphere radius");
      }
    }
    sphere_count_ += ls.centers.size();
  }
}

bool KinematicChain::within_limits(const JointVector& q, double tol) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (q[i] < joints_[i].lower - tol || q[i] > joints_[i].upper + tol) return false;
  }
  return true;
}

JointVector KinematicChain::clamp(const JointVector& q) const {
  JointVector out = q;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    out[i] = std::clamp(out[i], joints_[i].lower, joints_[i].upper);
  }
  return out;
}

double KinematicChain::reach() const {
  double r = tool_.translation().norm();
  for (std::size_t i = 1; i < joints_.size(); ++i) r += joints_[i].offset.norm();
  return r;
}

KinematicChain KinematicChain::planar(std::span<const double> lengths,
                                      double sphere_radius) {
  std::vector<Joint> joints;
  std::vector<LinkSpheres> spheres;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Joint j;
    j.axis = Vec3::UnitZ();
    j.offset = i == 0 ? Vec3::Zero() : Vec3(lengths[i - 1], 0.0, 0.0);
    j.lower = -3.0;
    j.upper = 3.0;
    joints.push_back(j);
    LinkSpheres ls;
    const int n = std::max(2, static_cast<int>(std::ceil(lengths[i] / sphere_radius / 2.0)));
    for (int k = 1; k <= n; ++k) {
      ls.centers.emplace_back(lengths[i] * k / (n + 1.0), 0.0, 0.0);
      ls.radii.push_back(sphere_radius);
    }
    spheres.push_back(std::move(ls));
  }
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();
  tool.translation() = Vec3(lengths.back(), 0.0, 0.0);
  return KinematicChain(std::move(joints), std::move(spheres), tool);
}

FkResult fk(const KinematicChain& chain, const JointVector& q) {
  const std::size_t n = chain.dof();
  if (static_cast<std::size_t>(q.size()) != n) {
    throw std::invalid_argument("fk: joint vector has " + std::to_string(q.size()) +
                                " entries, chain has " + std::to_string(n) + " joints");
  }
  FkResult out;
  out.within_limits = chain.within_limits(q);
  out.joint_origins.resize(n);
  out.joint_axes.resize(n);
  out.spheres.centers.reserve(chain.sphere_count());
  out.spheres.radii.reserve(chain.sphere_count());
  out.sphere_link.reserve(chain.sphere_count());

  Eigen::Isometry3d frame = chain.base();
  for (std::size_t i = 0; i < n; ++i) {
    const Joint& j = chain.joints()[i];
    frame.translate(j.offset);
    out.joint_origins[i] = frame.translation();
    out.joint_axes[i] = frame.linear() * j.axis;
    frame.rotate(Eigen::AngleAxisd(q[static_cast<Eigen::Index>(i)], j.axis));
    const LinkSpheres& ls = chain.link_spheres()[i];
    for (std::size_t k = 0; k < ls.centers.size(); ++k) {
      out.spheres.centers.push_back(frame * ls.centers[k]);
      out.spheres.radii.push_back(ls.radii[k]);
      out.sphere_link.push_back(static_cast<int>(i));
    }
  }
  out.tool = frame * chain.tool();
  const Vec3 p = out.tool.translation();
  const Vec3 x_axis = out.tool.linear().col(0);
  out.ee = Pose{p.x(), p.y(), p.z(), std::atan2(x_axis.y(), x_axis.x())};
  return out;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const KinematicChain& chain,
                                                  const JointVector& q) {
  const FkResult f = fk(chain, q);
  const Vec3 p = f.tool.translation();
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, chain.dof());
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    const Vec3& a = f.joint_axes[j];
    J.block<3, 1>(0, static_cast<Eigen::Index>(j)) = a.cross(p - f.joint_origins[j]);
    J.block<3, 1>(3, static_cast<Eigen::Index>(j)) = a;
  }
  return J;
}

void accumulate_point_gradient(const FkResult& f, int link, const Vec3& point,
                               const Vec3& g, std::span<double> grad_q) {
  for (int j = 0; j <= link; ++j) {
    // g . (a x (p - o)) = a . ((p - o) x g)
    grad_q[static_cast<std::size_t>(j)] +=
        f.joint_axes[static_cast<std::size_t>(j)].dot(
            (point - f.joint_origins[static_cast<std::size_t>(j)]).cross(g));
  }
}

Eigen::RowVectorXd yaw_gradient(const FkResult& f) {
  const Vec3 x = f.tool.linear().col(0);
  const double denom = x.x() * x.x() + x.y() * x.y();
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(f.joint_axes.size()));
  if (denom <= 1e-18) return out;
  for (std::size_t j = 0; j < f.joint_axes.size(); ++j) {
    const Vec3 dx = f.joint_axes[j].cross(x);
    out[static_cast<Eigen::Index>(j)] = (x.x() * dx.y() - x.y() * dx.x()) / denom;
  }
  return out;
}

double tool_tilt(const Eigen::Isometry3d& tool) {
  const Vec3 z = tool.linear().col(2);
  const Vec3 down(0.0, 0.0, -1.0);
  return std::atan2(z.cross(down).norm(), z.dot(down));
}

void GraspSpec::validate() const {
  if (!(approach.z() > 0.0)) {
    throw std::invalid_argument("grasp approach must have positive z (top-down)");
  }
  if (std::abs(tool_axis.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("grasp tool_axis is not unit length");
  }
}

double axis_misalignment(const Eigen::Isometry3d& tool, const Vec3& axis) {
  return 1.0 - tool.linear().col(2).dot(axis);
}

Pose grasp_pose(const Pose& object, const GraspSpec& grasp) {
  const Vec3 p = object.apply(grasp.approach);
  return Pose{p.x(), p.y(), p.z(), wrap_angle(object.yaw + grasp.yaw_offset)};
}

Pose object_from_grasp(const Pose& ee, const GraspSpec& grasp) {
  Pose obj{0.0, 0.0, 0.0, wrap_angle(ee.yaw - grasp.yaw_offset)};
  const Vec3 p = ee.translation() - obj.rotate(grasp.approach);
  obj.x = p.x();
  obj.y = p.y();
  obj.z = p.z();
  return obj;
}

namespace {

struct IkAttempt {
  JointVector q;
  double pos_err{INFINITY};
  double yaw_err{INFINITY};
  double tilt{0.0};
};

IkAttempt ik_descend(const KinematicChain& chain, const Pose& target,
                     const IkConfig& config, JointVector q) {
  const auto n = static_cast<Eigen::Index>(chain.dof());
  const double lambda2 = config.damping * config.damping;
  IkAttempt best;
  for (int iter = 0; iter <= config.max_iters; ++iter) {
    const FkResult f = fk(chain, q);
    const Vec3 e_pos = target.translation() - f.tool.translation();
    const double e_yaw = wrap_angle(target.yaw - f.ee.yaw);
    const double tilt = tool_tilt(f.tool);
    IkAttempt now{q, e_pos.norm(), std::abs(e_yaw), tilt};
    if (now.pos_err + now.yaw_err < best.pos_err + best.yaw_err) best = now;
    const bool on_target =
        now.pos_err < config.position_tol && now.yaw_err < config.yaw_tol;
    if (on_target && (!config.prefer_top_down || tilt < config.tilt_tol)) {
      return now;
    }
    if (iter == config.max_iters) break;

    Eigen::Matrix<double, 4, Eigen::Dynamic> J(4, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      J.block<3, 1>(0, j) = f.joint_axes[ju].cross(f.tool.translation() - f.joint_origins[ju]);
    }
    J.row(3) = yaw_gradient(f);
    Eigen::Vector4d e;
    e << e_pos, e_yaw;
    const Eigen::Matrix4d A = J * J.transpose() + lambda2 * Eigen::Matrix4d::Identity();
    const Eigen::LDLT<Eigen::Matrix4d> solver(A);
    JointVector dq = J.transpose() * solver.solve(e);

    if (config.prefer_top_down && n > 4) {
      // Secondary task h = 1 + z_tool . z_world (zero when pointing down),
      // projected into the null space of the primary task.
      const Vec3 z = f.tool.linear().col(2);
      JointVector grad_h(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        grad_h[j] = f.joint_axes[static_cast<std::size_t>(j)].cross(z).z();
      }
      const JointVector null =
          grad_h - J.transpose() * solver.solve(J * grad_h);
      dq -= 0.5 * null;
    }
    const double step = dq.norm();
    if (step > 0.5) dq *= 0.5 / step;
    q = chain.clamp(q + dq);
  }
  return best;
}

}  // namespace

IkResult ik_solve(const KinematicChain& chain, const Pose& target,
                  const IkConfig& config, std::uint64_t stream) {
  std::mt19937_64 rng(stream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(chain.dof());
  IkAttempt best;
  bool found = false;
  const auto score = [](const IkAttempt& a) { return a.pos_err + a.yaw_err; };
  for (int r = 0; r < config.restarts; ++r) {
    JointVector seed(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Joint& jt = chain.joints()[static_cast<std::size_t>(j)];
      seed[j] = jt.lower + unit(rng) * (jt.upper - jt.lower);
    }
    if (r == 0 && chain.home) seed = chain.clamp(*chain.home);
    IkAttempt a = ik_descend(chain, target, config, seed);
    const bool ok = a.pos_err < config.position_tol && a.yaw_err < config.yaw_tol;
    if (ok && !found) {
      best = a;
      found = true;
    } else if (ok && found) {
      if (a.tilt < best.tilt) best = a;
    } else if (!found && score(a) < score(best)) {
      best = a;
    }
    // A converged top-down (or unconstrained) solution ends the search.
    if (ok && (!config.prefer_top_down || a.tilt < config.tilt_tol)) break;
  }
  IkResult out;
  out.reachable = found;
  out.q = best.q.size() == n ? best.q : JointVector::Zero(n);
  out.position_error = best.pos_err;
  out.yaw_error = best.yaw_err;
  out.tilt = best.tilt;
  return out;
}

IkResult ik_refine(const KinematicChain& chain, const Pose& target,
                   const IkConfig& config, const JointVector& seed) {
  if (static_cast<std::size_t>(seed.size()) != chain.dof()) {
    throw std::invalid_argument("ik_refine: seed has the wrong size");
  }
  const IkAttempt a = ik_descend(chain, target, config, chain.clamp(seed));
  IkResult out;
  out.reachable = a.pos_err < config.position_tol && a.yaw_err < config.yaw_tol;
  out.q = a.q.size() == seed.size() ? a.q : chain.clamp(seed);
  out.position_error = a.pos_err;
  out.yaw_error = a.yaw_err;
  out.tilt = a.tilt;
  return out;
}

std::vector<IkResult> ik_solve_batch(const KinematicChain& chain,
                                     std::span<const Pose> targets,
                                     const IkConfig& config, std::uint64_t seed) {
  std::vector<IkResult> out(targets.size());
  parallel_for(targets.size(), [&](std::size_t i) {
    out[i] = ik_solve(chain, targets[i], config, stream_seed(seed, 0, i));
  });
  return out;
}

}  // namespace spasm
