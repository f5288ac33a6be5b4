#pragma once

#include "spasm/geometry.hpp"
#include "spasm/particle_opt.hpp"
#include "spasm/robot.hpp"

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace spasm {

enum class YawMode { fixed, quantized_free };

// Object placement problem shared by stage 1 (as a CostModel) and stage 2
// (placement constraints evaluated at fk-derived poses).
class PlacementProblem {
 public:
  virtual ~PlacementProblem() = default;

  virtual std::size_t num_objects() const = 0;
  virtual const SphereSet& object_geometry(std::size_t i) const = 0;
  // Accumulates d(cost)/d(pose_i) into grads when grads is non-empty.
  virtual double placement_cost(std::span<const Pose> poses, CostMode mode,
                                std::span<PoseGradient> grads) const = 0;
  // Stage-1 search box for object i: x, y, z, yaw.
  virtual std::array<Bounds, 4> pose_bounds(std::size_t i) const = 0;
  virtual YawMode yaw_mode() const = 0;
  // Yaw used for object i when yaw_mode() == fixed.
  virtual double fixed_yaw(std::size_t i) const = 0;
  // Where each object starts (the pick pose); empty if not modeled.
  virtual const std::vector<Pose>& initial_poses() const = 0;
  // Static world obstacles (walls, clutter) for arm collision checks.
  virtual const WorldSpheres& obstacles() const = 0;
};

// ---------------------------------------------------------------- Tetris

struct Cell {
  int x{0};
  int y{0};
  bool operator==(const Cell&) const = default;
};

// Grid polyomino; one sphere of radius cell_size/2 per cell, centered on
// the cell (z = cell_size/2). The body origin is the cell centroid at the
// block's bottom face.
class BlockShape {
 public:
  // Throws std::invalid_argument if cells are empty, duplicated, or not
  // 4-connected, or cell_size <= 0.
  BlockShape(std::string name, std::vector<Cell> cells, double cell_size);

  const std::string& name() const { return name_; }
  const std::vector<Cell>& cells() const { return cells_; }
  double cell_size() const { return cell_size_; }
  const SphereSet& spheres() const { return spheres_; }
  double area() const { return cell_size_ * cell_size_ * static_cast<double>(cells_.size()); }

 private:
  std::string name_;
  std::vector<Cell> cells_;
  double cell_size_;
  SphereSet spheres_;
};

struct TetrisWeights {
  double block_block{1.0};  // W_bb
  double block_wall{1.0};   // W_bw
  double height{1.0};       // W_z
};

class TetrisProblem : public PlacementProblem {
 public:
  // Throws std::invalid_argument on an invalid box or when the block
  // areas do not exactly fill the box footprint.
  TetrisProblem(std::vector<BlockShape> blocks, Aabb box, double z_star,
                YawMode yaw_mode, TetrisWeights weights = {},
                std::vector<double> yaws = {}, std::vector<Pose> initial = {});

  const std::vector<BlockShape>& blocks() const { return blocks_; }
  const Aabb& box() const { return box_; }
  double z_star() const { return z_star_; }
  const TetrisWeights& weights() const { return weights_; }
  const std::vector<WorldSpheres>& walls() const { return walls_; }

  std::size_t num_objects() const override { return blocks_.size(); }
  const SphereSet& object_geometry(std::size_t i) const override {
    return blocks_[i].spheres();
  }
  double placement_cost(std::span<const Pose> poses, CostMode mode,
                        std::span<PoseGradient> grads) const override;
  std::array<Bounds, 4> pose_bounds(std::size_t i) const override;
  YawMode yaw_mode() const override { return yaw_mode_; }
  double fixed_yaw(std::size_t i) const override { return yaws_[i]; }
  const std::vector<Pose>& initial_poses() const override { return initial_; }
  const WorldSpheres& obstacles() const override { return wall_union_; }

 private:
  std::vector<BlockShape> blocks_;
  Aabb box_;
  double z_star_;
  YawMode yaw_mode_;
  TetrisWeights weights_;
  std::vector<double> yaws_;
  std::vector<Pose> initial_;
  std::vector<WorldSpheres> walls_;
  WorldSpheres wall_union_;
};

// Σ_{i<j} W_bb·pen + Σ_{i,w} W_bw·pen + W_z·Σ|z_i − z*| (squared terms in
// quadratic mode).
double tetris_cost(const TetrisProblem& problem, std::span<const Pose> poses,
                   CostMode mode);

// Four wall sphere sets lining the outside of the box footprint.
std::vector<WorldSpheres> make_walls(const Aabb& box, double cell_size);

// ---------------------------------------------------------------- Tower

struct TowerWeights {
  double stable{1.0};
  double height{1.0};
  double collision{1.0};
};

// Stack of B uniform cubes, block i (0-based) targeting height
// table_height - h/2 + (i+1)·h. Each cube is 8 spheres of radius h/4.
class TowerProblem : public PlacementProblem {
 public:
  struct Obstacle {
    SphereSet spheres;
    Pose pose;
  };

  // Throws std::invalid_argument unless B >= 2 and h > 0.
  TowerProblem(int num_blocks, double block_size, Aabb region,
               std::vector<Obstacle> obstacles, double table_height,
               TowerWeights weights = {}, std::vector<Pose> initial = {});

  int block_count() const { return num_blocks_; }
  double block_size() const { return block_size_; }
  double table_height() const { return table_height_; }
  const Aabb& region() const { return region_; }
  const TowerWeights& weights() const { return weights_; }
  const std::vector<Obstacle>& obstacle_list() const { return obstacle_list_; }
  double target_height(std::size_t i) const;

  std::size_t num_objects() const override { return static_cast<std::size_t>(num_blocks_); }
  const SphereSet& object_geometry(std::size_t) const override { return cube_; }
  double placement_cost(std::span<const Pose> poses, CostMode mode,
                        std::span<PoseGradient> grads) const override;
  std::array<Bounds, 4> pose_bounds(std::size_t i) const override;
  YawMode yaw_mode() const override { return YawMode::fixed; }
  double fixed_yaw(std::size_t) const override { return 0.0; }
  const std::vector<Pose>& initial_poses() const override { return initial_; }
  const WorldSpheres& obstacles() const override { return obstacles_; }

 private:
  int num_blocks_;
  double block_size_;
  Aabb region_;
  std::vector<Obstacle> obstacle_list_;
  WorldSpheres obstacles_;
  double table_height_;
  TowerWeights weights_;
  std::vector<Pose> initial_;
  SphereSet cube_;
};

// w_stable·Σ dist(CoM above i, footprint i) + w_height·Σ(z_i − target_i)²
// + w_coll·(block-block + block-obstacle penetration).
double tower_placement_cost(const TowerProblem& problem,
                            std::span<const Pose> poses, CostMode mode);

// Euclidean distance from p to the axis-aligned square of half-width
// `half` centered at c (0 inside).
double square_distance(double px, double py, double cx, double cy, double half);

// ---------------------------------------------------------------- Motion

struct MotionProblem {
  JointVector start;
  JointVector goal;
  WorldSpheres obstacles;

  // Throws std::invalid_argument if start/goal are off-size or outside
  // the chain's joint limits.
  void validate(const KinematicChain& chain) const;
};

// ---------------------------------------------------------------- Cost model

// Stage-1 CostModel over a PlacementProblem: D = 4n (yaw free) or 3n
// (yaw fixed), rows laid out as [x, y, z, (yaw)] per object.
class PlacementCostModel : public CostModel {
 public:
  explicit PlacementCostModel(const PlacementProblem& problem);

  std::size_t dimension() const override { return dim_; }
  const std::vector<Bounds>& bounds() const override { return bounds_; }
  double cost(std::span<const double> x, CostMode mode) const override;
  double cost_gradient(std::span<const double> x, CostMode mode,
                       std::span<double> grad) const override;
  double sampling_quantum(std::size_t dim) const override;

  std::size_t per_object() const { return stride_; }
  std::vector<Pose> poses(std::span<const double> x) const;
  std::vector<double> encode(std::span<const Pose> poses) const;
  const PlacementProblem& problem() const { return problem_; }

 private:
  const PlacementProblem& problem_;
  std::size_t stride_;
  std::size_t dim_;
  std::vector<Bounds> bounds_;
};

std::unique_ptr<PlacementCostModel> as_cost_model(const PlacementProblem& problem);

// ---------------------------------------------------------------- Checkers
// Recomputed from first principles (own transforms, own loops) so that they
// can audit the optimizer's cost path.

struct PlacementCheck {
  double max_penetration{0.0};  // object-object and object-obstacle/wall
  double max_height_error{0.0};
  double max_stability_error{0.0};  // tower only
  double sum_squares{0.0};          // quadratic-mode total, recomputed
  bool satisfied(double epsilon) const { return sum_squares < epsilon; }
  bool strictly_satisfied(double epsilon) const {
    return max_penetration < epsilon && max_height_error < epsilon &&
           max_stability_error < epsilon;
  }
};

PlacementCheck check_tetris(const TetrisProblem& problem, std::span<const Pose> poses);
PlacementCheck check_tower(const TowerProblem& problem, std::span<const Pose> poses);
PlacementCheck check_placement(const PlacementProblem& problem,
                               std::span<const Pose> poses);

}  // namespace spasm
