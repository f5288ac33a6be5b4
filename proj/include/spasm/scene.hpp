#pragma once

#include "spasm/particle_opt.hpp"
#include "spasm/problems.hpp"
#include "spasm/robot.hpp"
#include "spasm/trajopt.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace spasm {

// Parse or validation failure; what() starts with the offending field path.
class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { tetris, tower, motion };

struct Scene {
  std::string name;
  ProblemKind kind{ProblemKind::tetris};
  std::shared_ptr<const PlacementProblem> placement;  // tetris / tower
  std::shared_ptr<const MotionProblem> motion;        // motion
  std::optional<KinematicChain> robot;
  GraspSpec grasp;
  // Scene defaults; command-line flags override them.
  OptimizerConfig optimizer;
  TrajOptConfig trajopt;

  bool has_stage1() const { return placement != nullptr; }
  const TetrisProblem* tetris() const;
  const TowerProblem* tower() const;
  // Stage-2 task; throws SceneError when the scene has no robot.
  TrajTask task() const;
};

// Throws SceneError on unreadable files, malformed JSON, unknown fields,
// wrong types, or violated problem invariants.
Scene load_scene(const std::string& path);
Scene parse_scene(const std::string& text, const std::string& origin = "scene");

const char* to_string(ProblemKind kind);

}  // namespace spasm
