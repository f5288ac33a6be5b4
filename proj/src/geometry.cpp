#include "spasm/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spasm {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

Vec3 Pose::rotate(const Vec3& v) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
}

bool Pose::is_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
         std::isfinite(yaw);
}

Pose Pose::normalized() const { return {x, y, z, wrap_angle(yaw)}; }

SphereSet::SphereSet(std::vector<Vec3> centers, std::vector<double> radii)
    : centers_(std::move(centers)), radii_(std::move(radii)) {
  if (centers_.empty()) throw std::invalid_argument("sphere set is empty");
  if (centers_.size() != radii_.size()) {
    throw std::invalid_argument("sphere set has " +
                                std::to_string(centers_.size()) +
                                " centers but " + std::to_string(radii_.size()) +
                                " radii");
  }
  for (std::size_t i = 0; i < radii_.size(); ++i) {
    if (!(radii_[i] > 0.0) || !std::isfinite(radii_[i])) {
      throw std::invalid_argument("sphere " + std::to_string(i) +
                                  " has non-positive radius");
    }
  }
}

void WorldSpheres::append(const WorldSpheres& other) {
  centers.insert(centers.end(), other.centers.begin(), other.centers.end());
  radii.insert(radii.end(), other.radii.begin(), other.radii.end());
}

std::vector<Vec3> transform(const SphereSet& set, const Pose& pose) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  std::vector<Vec3> out;
  out.reserve(set.size());
  for (const Vec3& l : set.centers()) {
    out.emplace_back(c * l.x() - s * l.y() + pose.x,
                     s * l.x() + c * l.y() + pose.y, l.z() + pose.z);
  }
  return out;
}

WorldSpheres place(const SphereSet& set, const Pose& pose) {
  return {transform(set, pose), set.radii()};
}

double pen_pair(const Vec3& c_a, double r_a, const Vec3& c_b, double r_b) {
  const double d = (c_a - c_b).norm();
  const double p = r_a + r_b - d;
  return p > 0.0 ? p : 0.0;
}

double pen_sets(const WorldSpheres& a, const WorldSpheres& b, CostMode mode) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3& ca = a.centers[i];
    const double ra = a.radii[i];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double reach = ra + b.radii[j];
      const double d2 = (ca - b.centers[j]).squaredNorm();
      if (d2 >= reach * reach) continue;
      total += apply_mode(reach - std::sqrt(d2), mode);
    }
  }
  return total;
}

double pen_sets_accumulate(const WorldSpheres& a, const WorldSpheres& b,
                           CostMode mode, std::span<Vec3> grad_a,
                           std::span<Vec3> grad_b, double weight) {
  const bool want_a = !grad_a.empty();
  const bool want_b = !grad_b.empty();
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3& ca = a.centers[i];
    const double ra = a.radii[i];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double reach = ra + b.radii[j];
      const Vec3 diff = ca - b.centers[j];
      const double d2 = diff.squaredNorm();
      if (d2 >= reach * reach) continue;
      const double d = std::sqrt(d2);
      const double p = reach - d;
      total += apply_mode(p, mode);
      if (d <= 0.0) continue;  // coincident centers: direction undefined
      // dp/dc_a = -(c_a - c_b)/|c_a - c_b|
      const Vec3 g = diff * (-weight * mode_slope(p, mode) / d);
      if (want_a) grad_a[i] += g;
      if (want_b) grad_b[j] -= g;
    }
  }
  return weight * total;
}

PoseGradient pose_gradient(const Pose& pose,
                           std::span<const Vec3> world_centers,
                           std::span<const Vec3> center_grads) {
  PoseGradient g;
  for (std::size_t k = 0; k < world_centers.size(); ++k) {
    const Vec3& gk = center_grads[k];
    // d(world)/d(yaw) = z_hat x (world - translation)
    const double rx = world_centers[k].x() - pose.x;
    const double ry = world_centers[k].y() - pose.y;
    g.x += gk.x();
    g.y += gk.y();
    g.z += gk.z();
    g.yaw += -ry * gk.x() + rx * gk.y();
  }
  return g;
}

double pen_sets_grad(const SphereSet& a, const Pose& a_pose,
                     const WorldSpheres& b, CostMode mode, PoseGradient& grad) {
  const WorldSpheres wa = place(a, a_pose);
  std::vector<Vec3> ga(wa.size(), Vec3::Zero());
  const double cost = pen_sets_accumulate(wa, b, mode, ga, {});
  grad = pose_gradient(a_pose, wa.centers, ga);
  return cost;
}

}  // namespace spasm
