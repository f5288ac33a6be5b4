#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace spasm {

using Vec3 = Eigen::Vector3d;

// Penalty shape used by every collision term: the raw penetration depth
// (linear) or its square (quadratic).
enum class CostMode { linear, quadratic };

inline double apply_mode(double p, CostMode mode) {
  return mode == CostMode::linear ? p : p * p;
}
// d(apply_mode(p))/dp
inline double mode_slope(double p, CostMode mode) {
  return mode == CostMode::linear ? 1.0 : 2.0 * p;
}

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

// Rigid placement restricted to translation plus yaw about world z.
struct Pose {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double yaw{0.0};

  Vec3 translation() const { return {x, y, z}; }
  // Rotates a body-frame vector into the world frame (yaw only).
  Vec3 rotate(const Vec3& v) const;
  Vec3 apply(const Vec3& v) const { return rotate(v) + translation(); }
  bool is_finite() const;
  Pose normalized() const;
};

// Gradient of a scalar with respect to (x, y, z, yaw).
struct PoseGradient {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double yaw{0.0};

  PoseGradient& operator+=(const PoseGradient& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    yaw += o.yaw;
    return *this;
  }
};

// A rigid body as body-frame spheres. Throws std::invalid_argument when
// empty, mismatched, or holding a non-positive radius.
class SphereSet {
 public:
  SphereSet() = default;
  SphereSet(std::vector<Vec3> centers, std::vector<double> radii);

  std::size_t size() const { return centers_.size(); }
  bool empty() const { return centers_.empty(); }
  const std::vector<Vec3>& centers() const { return centers_; }
  const std::vector<double>& radii() const { return radii_; }

 private:
  std::vector<Vec3> centers_;
  std::vector<double> radii_;
};

// World-frame spheres (the output of transform, or a static obstacle).
struct WorldSpheres {
  std::vector<Vec3> centers;
  std::vector<double> radii;

  std::size_t size() const { return centers.size(); }
  void append(const WorldSpheres& other);
};

struct Aabb {
  Vec3 min{Vec3::Zero()};
  Vec3 max{Vec3::Zero()};

  bool valid() const { return (min.array() <= max.array()).all(); }
  Vec3 extent() const { return max - min; }
};

// Local centers rotated by yaw then translated; radii unchanged.
std::vector<Vec3> transform(const SphereSet& set, const Pose& pose);
WorldSpheres place(const SphereSet& set, const Pose& pose);

// max(0, r_a + r_b - |c_a - c_b|).
double pen_pair(const Vec3& c_a, double r_a, const Vec3& c_b, double r_b);

// Sum over all cross pairs of pen_pair (or its square).
double pen_sets(const WorldSpheres& a, const WorldSpheres& b, CostMode mode);

// weight·pen_sets, also accumulating its gradient with respect to each
// center into grad_a and grad_b (either may be empty to skip that side).
// Pairs at exactly zero penetration, or with coincident centers,
// contribute zero gradient.
double pen_sets_accumulate(const WorldSpheres& a, const WorldSpheres& b,
                           CostMode mode, std::span<Vec3> grad_a,
                           std::span<Vec3> grad_b, double weight = 1.0);

// Chains per-center gradients of a body placed at `pose` back to the pose.
// `world_centers` are the already-transformed centers of that body.
PoseGradient pose_gradient(const Pose& pose,
                           std::span<const Vec3> world_centers,
                           std::span<const Vec3> center_grads);

// pen_sets and its gradient with respect to A's pose.
double pen_sets_grad(const SphereSet& a, const Pose& a_pose,
                     const WorldSpheres& b, CostMode mode, PoseGradient& grad);

}  // namespace spasm
