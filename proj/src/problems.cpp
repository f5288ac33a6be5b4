#include "spasm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>

namespace spasm {

// ---------------------------------------------------------------- BlockShape

namespace {

bool four_connected(const std::vector<Cell>& cells) {
  std::vector<bool> seen(cells.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const Cell c = cells[stack.back()];
    stack.pop_back();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (seen[k]) continue;
      if (std::abs(cells[k].x - c.x) + std::abs(cells[k].y - c.y) == 1) {
        seen[k] = true;
        ++visited;
        stack.push_back(k);
      }
    }
  }
  return visited == cells.size();
}

SphereSet cell_spheres(const std::vector<Cell>& cells, double cell_size) {
  double cx = 0.0;
  double cy = 0.0;
  for (const Cell& c : cells) {
    cx += c.x;
    cy += c.y;
  }
  cx /= static_cast<double>(cells.size());
  cy /= static_cast<double>(cells.size());
  std::vector<Vec3> centers;
  std::vector<double> radii;
  for (const Cell& c : cells) {
    centers.emplace_back((c.x - cx) * cell_size, (c.y - cy) * cell_size,
                         0.5 * cell_size);
    radii.push_back(0.5 * cell_size);
  }
  return SphereSet(std::move(centers), std::move(radii));
}

std::vector<Cell> checked_cells(const std::string& name, std::vector<Cell> cells,
                                double cell_size) {
  if (cells.empty()) throw std::invalid_argument("block '" + name + "' has no cells");
  if (!(cell_size > 0.0)) {
    throw std::invalid_argument("block '" + name + "' has non-positive cell_size");
  }
  std::set<std::pair<int, int>> unique;
  for (const Cell& c : cells) {
    if (!unique.emplace(c.x, c.y).second) {
      throw std::invalid_argument("block '" + name + "' repeats a cell");
    }
  }
  if (!four_connected(cells)) {
    throw std::invalid_argument("block '" + name + "' is not 4-connected");
  }
  return cells;
}

}  // namespace

BlockShape::BlockShape(std::string name, std::vector<Cell> cells, double cell_size)
    : name_(std::move(name)),
      cells_(checked_cells(name_, std::move(cells), cell_size)),
      cell_size_(cell_size),
      spheres_(cell_spheres(cells_, cell_size)) {}

// ---------------------------------------------------------------- Tetris

std::vector<WorldSpheres> make_walls(const Aabb& box, double cell_size) {
  const double r = cell_size;          // wall sphere radius
  const double step = 0.5 * cell_size; // spacing along the wall
  const double z = box.min.z() + 0.5 * cell_size;
  std::vector<WorldSpheres> walls(4);
  const auto line = [&](WorldSpheres& w, Vec3 from, Vec3 to) {
    const double len = (to - from).norm();
    const int n = static_cast<int>(std::ceil(len / step));
    for (int k = 0; k <= n; ++k) {
      w.centers.push_back(from + (to - from) * (static_cast<double>(k) / n));
      w.radii.push_back(r);
    }
  };
  const double x0 = box.min.x() - r;
  const double x1 = box.max.x() + r;
  const double y0 = box.min.y() - r;
  const double y1 = box.max.y() + r;
  line(walls[0], {x0, y0, z}, {x0, y1, z});  // -x
  line(walls[1], {x1, y0, z}, {x1, y1, z});  // +x
  line(walls[2], {x0, y0, z}, {x1, y0, z});  // -y
  line(walls[3], {x0, y1, z}, {x1, y1, z});  // +y
  return walls;
}

TetrisProblem::TetrisProblem(std::vector<BlockShape> blocks, Aabb box,
                             double z_star, YawMode yaw_mode,
                             TetrisWeights weights, std::vector<double> yaws,
                             std::vector<Pose> initial)
    : blocks_(std::move(blocks)),
      box_(box),
      z_star_(z_star),
      yaw_mode_(yaw_mode),
      weights_(weights),
      yaws_(std::move(yaws)),
      initial_(std::move(initial)) {
  if (blocks_.empty()) throw std::invalid_argument("tetris problem has no blocks");
  if (!box_.valid()) throw std::invalid_argument("box: min must be <= max");
  if (yaws_.empty()) yaws_.assign(blocks_.size(), 0.0);
  if (yaws_.size() != blocks_.size()) {
    throw std::invalid_argument("yaws: expected one entry per block");
  }
  if (!initial_.empty() && initial_.size() != blocks_.size()) {
    throw std::invalid_argument("initial_poses: expected one entry per block");
  }
  double area = 0.0;
  for (const BlockShape& b : blocks_) area += b.area();
  const Vec3 e = box_.extent();
  const double footprint = e.x() * e.y();
  if (std::abs(area - footprint) > 1e-9 * std::max(1.0, footprint)) {
    throw std::invalid_argument(
        "tight-packing invariant violated: block cell area " + std::to_string(area) +
        " != box footprint area " + std::to_string(footprint));
  }
  walls_ = make_walls(box_, blocks_.front().cell_size());
  for (const WorldSpheres& w : walls_) wall_union_.append(w);
}

std::array<Bounds, 4> TetrisProblem::pose_bounds(std::size_t i) const {
  const BlockShape& b = blocks_[i];
  const double c = b.cell_size();
  std::array<Bounds, 4> out;
  if (yaw_mode_ == YawMode::fixed) {
    // Keep every cell of the block, at its fixed yaw, inside the box.
    const Pose rot{0.0, 0.0, 0.0, yaws_[i]};
    double lo_x = INFINITY, hi_x = -INFINITY, lo_y = INFINITY, hi_y = -INFINITY;
    for (std::size_t k = 0; k < b.spheres().size(); ++k) {
      const Vec3 p = rot.rotate(b.spheres().centers()[k]);
      const double r = b.spheres().radii()[k];
      lo_x = std::min(lo_x, p.x() - r);
      hi_x = std::max(hi_x, p.x() + r);
      lo_y = std::min(lo_y, p.y() - r);
      hi_y = std::max(hi_y, p.y() + r);
    }
    out[0] = {box_.min.x() - lo_x, box_.max.x() - hi_x};
    out[1] = {box_.min.y() - lo_y, box_.max.y() - hi_y};
    // Rounding can leave an exactly-fitting block with lower > upper.
    for (int k = 0; k < 2; ++k) {
      if (out[k].lower > out[k].upper) {
        if (out[k].lower - out[k].upper > 1e-9) {
          throw std::invalid_argument("block '" + b.name() + "' does not fit in the box");
        }
        out[k].upper = out[k].lower;
      }
    }
    out[3] = {yaws_[i], yaws_[i]};
  } else {
    out[0] = {box_.min.x() + 0.5 * c, box_.max.x() - 0.5 * c};
    out[1] = {box_.min.y() + 0.5 * c, box_.max.y() - 0.5 * c};
    out[3] = {-std::numbers::pi, std::numbers::pi};
  }
  out[2] = {box_.min.z(), std::max(box_.min.z(), box_.max.z() - c)};
  return out;
}

double TetrisProblem::placement_cost(std::span<const Pose> poses, CostMode mode,
                                     std::span<PoseGradient> grads) const {
  const std::size_t n = blocks_.size();
  const bool want = !grads.empty();
  std::vector<WorldSpheres> world(n);
  std::vector<std::vector<Vec3>> cg(n);
  for (std::size_t i = 0; i < n; ++i) {
    world[i] = place(blocks_[i].spheres(), poses[i]);
    if (want) cg[i].assign(world[i].size(), Vec3::Zero());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += pen_sets_accumulate(world[i], world[j], mode,
                                   want ? std::span<Vec3>(cg[i]) : std::span<Vec3>(),
                                   want ? std::span<Vec3>(cg[j]) : std::span<Vec3>(),
                                   weights_.block_block);
    }
    for (const WorldSpheres& wall : walls_) {
      total += pen_sets_accumulate(world[i], wall, mode,
                                   want ? std::span<Vec3>(cg[i]) : std::span<Vec3>(),
                                   {}, weights_.block_wall);
    }
    const double dz = poses[i].z - z_star_;
    total += weights_.height * apply_mode(std::abs(dz), mode);
    if (want) {
      PoseGradient g = pose_gradient(poses[i], world[i].centers, cg[i]);
      const double sign = dz > 0.0 ? 1.0 : (dz < 0.0 ? -1.0 : 0.0);
      g.z += weights_.height * mode_slope(std::abs(dz), mode) * sign;
      grads[i] += g;
    }
  }
  return total;
}

double tetris_cost(const TetrisProblem& problem, std::span<const Pose> poses,
                   CostMode mode) {
  return problem.placement_cost(poses, mode, {});
}

// ---------------------------------------------------------------- Tower

namespace {

SphereSet cube_spheres(double h) {
  std::vector<Vec3> centers;
  std::vector<double> radii;
  const double q = 0.25 * h;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        centers.emplace_back(sx * q, sy * q, sz * q);
        radii.push_back(q);
      }
    }
  }
  return SphereSet(std::move(centers), std::move(radii));
}

double validated_block_size(int num_blocks, double block_size) {
  if (num_blocks < 2) throw std::invalid_argument("tower needs at least 2 blocks");
  if (!(block_size > 0.0)) throw std::invalid_argument("block_size must be > 0");
  return block_size;
}

// Offset of p from the square's nearest point, per axis (0 inside).
std::pair<double, double> square_offset(double px, double py, double cx,
                                        double cy, double half) {
  const auto axis = [half](double d) {
    const double a = std::abs(d) - half;
    return a > 0.0 ? (d > 0.0 ? a : -a) : 0.0;
  };
  return {axis(px - cx), axis(py - cy)};
}

}  // namespace

double square_distance(double px, double py, double cx, double cy, double half) {
  const auto [dx, dy] = square_offset(px, py, cx, cy, half);
  return std::hypot(dx, dy);
}

TowerProblem::TowerProblem(int num_blocks, double block_size, Aabb region,
                           std::vector<Obstacle> obstacles, double table_height,
                           TowerWeights weights, std::vector<Pose> initial)
    : num_blocks_(num_blocks),
      block_size_(validated_block_size(num_blocks, block_size)),
      region_(region),
      obstacle_list_(std::move(obstacles)),
      table_height_(table_height),
      weights_(weights),
      initial_(std::move(initial)),
      cube_(cube_spheres(block_size)) {
  if (!region_.valid()) throw std::invalid_argument("box: min must be <= max");
  if (!initial_.empty() && initial_.size() != static_cast<std::size_t>(num_blocks_)) {
    throw std::invalid_argument("initial_poses: expected one entry per block");
  }
  for (const Obstacle& o : obstacle_list_) obstacles_.append(place(o.spheres, o.pose));
}

double TowerProblem::target_height(std::size_t i) const {
  return table_height_ - 0.5 * block_size_ + static_cast<double>(i + 1) * block_size_;
}

std::array<Bounds, 4> TowerProblem::pose_bounds(std::size_t) const {
  const double h = block_size_;
  return {Bounds{region_.min.x(), region_.max.x()},
          Bounds{region_.min.y(), region_.max.y()},
          Bounds{table_height_ + 0.5 * h, table_height_ + (num_blocks_ - 0.5) * h},
          Bounds{0.0, 0.0}};
}

double TowerProblem::placement_cost(std::span<const Pose> poses, CostMode mode,
                                    std::span<PoseGradient> grads) const {
  const auto n = static_cast<std::size_t>(num_blocks_);
  const bool want = !grads.empty();
  const double half = 0.5 * block_size_;
  double total = 0.0;

  // Stability: CoM (xy) of the blocks above i against i's footprint.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double count = static_cast<double>(n - 1 - i);
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      mx += poses[j].x;
      my += poses[j].y;
    }
    mx /= count;
    my /= count;
    const auto [dx, dy] = square_offset(mx, my, poses[i].x, poses[i].y, half);
    const double dist = std::hypot(dx, dy);
    total += weights_.stable * apply_mode(dist, mode);
    if (want && dist > 0.0) {
      const double s = weights_.stable * mode_slope(dist, mode) / dist;
      for (std::size_t j = i + 1; j < n; ++j) {
        grads[j].x += s * dx / count;
        grads[j].y += s * dy / count;
      }
      grads[i].x -= s * dx;
      grads[i].y -= s * dy;
    }
  }

  // Height, squared in both modes.
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = poses[i].z - target_height(i);
    total += weights_.height * dz * dz;
    if (want) grads[i].z += 2.0 * weights_.height * dz;
  }

  // Collisions.
  std::vector<WorldSpheres> world(n);
  std::vector<std::vector<Vec3>> cg(n);
  for (std::size_t i = 0; i < n; ++i) {
    world[i] = place(cube_, poses[i]);
    if (want) cg[i].assign(world[i].size(), Vec3::Zero());
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += pen_sets_accumulate(world[i], world[j], mode,
                                   want ? std::span<Vec3>(cg[i]) : std::span<Vec3>(),
                                   want ? std::span<Vec3>(cg[j]) : std::span<Vec3>(),
                                   weights_.collision);
    }
    if (obstacles_.size() > 0) {
      total += pen_sets_accumulate(world[i], obstacles_, mode,
                                   want ? std::span<Vec3>(cg[i]) : std::span<Vec3>(),
                                   {}, weights_.collision);
    }
    if (want) grads[i] += pose_gradient(poses[i], world[i].centers, cg[i]);
  }
  return total;
}

double tower_placement_cost(const TowerProblem& problem,
                            std::span<const Pose> poses, CostMode mode) {
  return problem.placement_cost(poses, mode, {});
}

// ---------------------------------------------------------------- Motion

void MotionProblem::validate(const KinematicChain& chain) const {
  const auto n = static_cast<Eigen::Index>(chain.dof());
  if (start.size() != n) throw std::invalid_argument("start: expected " + std::to_string(n) + " joints");
  if (goal.size() != n) throw std::invalid_argument("goal: expected " + std::to_string(n) + " joints");
  if (!chain.within_limits(start)) throw std::invalid_argument("start: outside joint limits");
  if (!chain.within_limits(goal)) throw std::invalid_argument("goal: outside joint limits");
}

// ---------------------------------------------------------------- Cost model

PlacementCostModel::PlacementCostModel(const PlacementProblem& problem)
    : problem_(problem),
      stride_(problem.yaw_mode() == YawMode::fixed ? 3 : 4),
      dim_(stride_ * problem.num_objects()) {
  bounds_.reserve(dim_);
  for (std::size_t i = 0; i < problem.num_objects(); ++i) {
    const auto b = problem.pose_bounds(i);
    for (std::size_t k = 0; k < stride_; ++k) bounds_.push_back(b[k]);
  }
}

std::vector<Pose> PlacementCostModel::poses(std::span<const double> x) const {
  std::vector<Pose> out(problem_.num_objects());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* p = x.data() + i * stride_;
    const double yaw = stride_ == 4 ? p[3] : problem_.fixed_yaw(i);
    out[i] = Pose{p[0], p[1], p[2], wrap_angle(yaw)};
  }
  return out;
}

std::vector<double> PlacementCostModel::encode(std::span<const Pose> poses) const {
  std::vector<double> x(dim_);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    double* p = x.data() + i * stride_;
    p[0] = poses[i].x;
    p[1] = poses[i].y;
    p[2] = poses[i].z;
    if (stride_ == 4) p[3] = wrap_angle(poses[i].yaw);
  }
  return x;
}

double PlacementCostModel::cost(std::span<const double> x, CostMode mode) const {
  const auto p = poses(x);
  return problem_.placement_cost(p, mode, {});
}

double PlacementCostModel::cost_gradient(std::span<const double> x, CostMode mode,
                                         std::span<double> grad) const {
  const auto p = poses(x);
  std::vector<PoseGradient> g(p.size());
  const double c = problem_.placement_cost(p, mode, g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double* out = grad.data() + i * stride_;
    out[0] = g[i].x;
    out[1] = g[i].y;
    out[2] = g[i].z;
    if (stride_ == 4) out[3] = g[i].yaw;
  }
  return c;
}

double PlacementCostModel::sampling_quantum(std::size_t dim) const {
  if (stride_ == 4 && dim % 4 == 3) return 0.5 * std::numbers::pi;
  return 0.0;
}

std::unique_ptr<PlacementCostModel> as_cost_model(const PlacementProblem& problem) {
  return std::make_unique<PlacementCostModel>(problem);
}

// ---------------------------------------------------------------- Checkers

namespace {

struct Ball {
  double x, y, z, r;
};

std::vector<Ball> world_balls(const SphereSet& set, const Pose& pose) {
  std::vector<Ball> out;
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  for (std::size_t k = 0; k < set.size(); ++k) {
    const Vec3& l = set.centers()[k];
    out.push_back({pose.x + c * l.x() - s * l.y(), pose.y + s * l.x() + c * l.y(),
                   pose.z + l.z(), set.radii()[k]});
  }
  return out;
}

std::vector<Ball> balls_of(const WorldSpheres& w) {
  std::vector<Ball> out;
  for (std::size_t k = 0; k < w.size(); ++k) {
    out.push_back({w.centers[k].x(), w.centers[k].y(), w.centers[k].z(), w.radii[k]});
  }
  return out;
}

// Adds weight·pen² per overlapping pair; tracks the largest pen.
void audit_pairs(const std::vector<Ball>& a, const std::vector<Ball>& b,
                 double weight, PlacementCheck& out) {
  for (const Ball& p : a) {
    for (const Ball& q : b) {
      const double d = std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                 (p.z - q.z) * (p.z - q.z));
      const double pen = std::max(0.0, p.r + q.r - d);
      out.max_penetration = std::max(out.max_penetration, pen);
      out.sum_squares += weight * pen * pen;
    }
  }
}

}  // namespace

PlacementCheck check_tetris(const TetrisProblem& problem, std::span<const Pose> poses) {
  PlacementCheck out;
  const std::size_t n = problem.blocks().size();
  std::vector<std::vector<Ball>> balls(n);
  for (std::size_t i = 0; i < n; ++i) balls[i] = world_balls(problem.blocks()[i].spheres(), poses[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      audit_pairs(balls[i], balls[j], problem.weights().block_block, out);
    }
    for (const WorldSpheres& wall : problem.walls()) {
      audit_pairs(balls[i], balls_of(wall), problem.weights().block_wall, out);
    }
    const double dz = std::abs(poses[i].z - problem.z_star());
    out.max_height_error = std::max(out.max_height_error, dz);
    out.sum_squares += problem.weights().height * dz * dz;
  }
  return out;
}

PlacementCheck check_tower(const TowerProblem& problem, std::span<const Pose> poses) {
  PlacementCheck out;
  const auto n = static_cast<std::size_t>(problem.block_count());
  const double h = problem.block_size();
  const auto& w = problem.weights();
  std::vector<std::vector<Ball>> balls(n);
  for (std::size_t i = 0; i < n; ++i) balls[i] = world_balls(problem.object_geometry(i), poses[i]);
  const auto obstacle_balls = balls_of(problem.obstacles());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) audit_pairs(balls[i], balls[j], w.collision, out);
    audit_pairs(balls[i], obstacle_balls, w.collision, out);
    const double target = problem.table_height() + (static_cast<double>(i) + 0.5) * h;
    const double dz = poses[i].z - target;
    out.max_height_error = std::max(out.max_height_error, std::abs(dz));
    out.sum_squares += w.height * dz * dz;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      mx += poses[j].x;
      my += poses[j].y;
    }
    mx /= static_cast<double>(n - 1 - i);
    my /= static_cast<double>(n - 1 - i);
    const double ox = std::max(0.0, std::abs(mx - poses[i].x) - 0.5 * h);
    const double oy = std::max(0.0, std::abs(my - poses[i].y) - 0.5 * h);
    const double dist = std::sqrt(ox * ox + oy * oy);
    out.max_stability_error = std::max(out.max_stability_error, dist);
    out.sum_squares += w.stable * dist * dist;
  }
  return out;
}

PlacementCheck check_placement(const PlacementProblem& problem,
                               std::span<const Pose> poses) {
  if (const auto* t = dynamic_cast<const TetrisProblem*>(&problem)) return check_tetris(*t, poses);
  if (const auto* t = dynamic_cast<const TowerProblem*>(&problem)) return check_tower(*t, poses);
  throw std::invalid_argument("check_placement: unsupported problem type");
}

}  // namespace spasm
