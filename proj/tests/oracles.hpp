#pragma once

// Reference computations written independently of the library kernels.

#include "spasm/geometry.hpp"
#include "spasm/problems.hpp"
#include "spasm/robot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using spasm::Vec3;

inline double pen_sum(const spasm::WorldSpheres& a, const spasm::WorldSpheres& b,
                      bool squared) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double dx = a.centers[i].x() - b.centers[j].x();
      const double dy = a.centers[i].y() - b.centers[j].y();
      const double dz = a.centers[i].z() - b.centers[j].z();
      const double p = std::max(0.0, a.radii[i] + b.radii[j] - std::sqrt(dx * dx + dy * dy + dz * dz));
      total += squared ? p * p : p;
    }
  }
  return total;
}

inline double pen_max(const spasm::WorldSpheres& a, const spasm::WorldSpheres& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      worst = std::max(worst, a.radii[i] + b.radii[j] - (a.centers[i] - b.centers[j]).norm());
    }
  }
  return worst;
}

// Smallest |pen| over all cross pairs; used to keep finite differences
// away from the contact kink.
inline double min_abs_gap(const spasm::WorldSpheres& a, const spasm::WorldSpheres& b) {
  double g = INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      g = std::min(g, std::abs(a.radii[i] + b.radii[j] - (a.centers[i] - b.centers[j]).norm()));
    }
  }
  return g;
}

inline spasm::WorldSpheres world(const spasm::SphereSet& s, const spasm::Pose& p) {
  spasm::WorldSpheres w;
  const double c = std::cos(p.yaw);
  const double sn = std::sin(p.yaw);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Vec3& l = s.centers()[k];
    w.centers.emplace_back(p.x + c * l.x() - sn * l.y(), p.y + sn * l.x() + c * l.y(), p.z + l.z());
    w.radii.push_back(s.radii()[k]);
  }
  return w;
}

inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / ||b|| (absolute when b is tiny).
inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

// Rodrigues rotation as a 4x4 block.
inline Eigen::Matrix4d rot4(const Vec3& axis, double angle) {
  Eigen::Matrix3d K;
  K << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity() + std::sin(angle) * K +
                        (1.0 - std::cos(angle)) * K * K;
  return M;
}

inline Eigen::Matrix4d trans4(const Vec3& t) {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.block<3, 1>(0, 3) = t;
  return M;
}

// Tool frame as an explicit product of homogeneous matrices.
inline Eigen::Matrix4d tool_matrix(const spasm::KinematicChain& chain, const Eigen::VectorXd& q) {
  Eigen::Matrix4d M = chain.base().matrix();
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const spasm::Joint& j = chain.joints()[i];
    M = M * trans4(j.offset) * rot4(j.axis, q[static_cast<Eigen::Index>(i)]);
  }
  return M * chain.tool().matrix();
}

inline Eigen::VectorXd random_q(const spasm::KinematicChain& chain, std::mt19937_64& rng) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    std::uniform_real_distribution<double> u(chain.joints()[i].lower, chain.joints()[i].upper);
    q[static_cast<Eigen::Index>(i)] = u(rng);
  }
  return q;
}

// Quadratic tetris cost from raw pairs, walls taken from the problem.
inline double tetris_sum_squares(const spasm::TetrisProblem& p, const std::vector<spasm::Pose>& poses) {
  const auto& w = p.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto a = world(p.blocks()[i].spheres(), poses[i]);
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      total += w.block_block * pen_sum(a, world(p.blocks()[j].spheres(), poses[j]), true);
    }
    for (const auto& wall : p.walls()) total += w.block_wall * pen_sum(a, wall, true);
    total += w.height * (poses[i].z - p.z_star()) * (poses[i].z - p.z_star());
  }
  return total;
}

struct GridSolution {
  std::vector<spasm::Pose> poses;
};

// All grid placements (step `h` inside each block's pose bounds) whose
// quadratic cost is below eps.
inline std::vector<GridSolution> enumerate_grid(const spasm::TetrisProblem& p, double h, double eps) {
  const std::size_t n = p.num_objects();
  std::vector<std::vector<spasm::Pose>> axes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = p.pose_bounds(i);
    const auto ticks = [h](const spasm::Bounds& r) {
      std::vector<double> v;
      for (double x = r.lower; x <= r.upper + 1e-12; x += h) v.push_back(x);
      return v;
    };
    for (double x : ticks(b[0])) {
      for (double y : ticks(b[1])) {
        for (double z : ticks(b[2])) axes[i].push_back({x, y, z, p.fixed_yaw(i)});
      }
    }
  }
  std::vector<GridSolution> out;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    std::vector<spasm::Pose> poses(n);
    for (std::size_t i = 0; i < n; ++i) poses[i] = axes[i][idx[i]];
    if (tetris_sum_squares(p, poses) < eps) out.push_back({poses});
    std::size_t k = 0;
    while (k < n && ++idx[k] == axes[k].size()) idx[k++] = 0;
    if (k == n) break;
  }
  return out;
}

}  // namespace oracle
