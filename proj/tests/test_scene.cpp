#include "doctest.h"

#include "spasm/scene.hpp"

#include <string>

using namespace spasm;

namespace {

const char* kDomino = R"({
  "problem_type": "tetris",
  "box": {"min": [0, 0, 0], "max": [2, 2, 1]},
  "blocks": [
    {"name": "a", "cells": [[0, 0], [1, 0]], "cell_size": 1.0},
    {"name": "b", "cells": [[0, 0], [1, 0]], "cell_size": 1.0}
  ]
})";

std::string error_of(const std::string& text) {
  try {
    parse_scene(text, "s");
  } catch (const SceneError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("bundled scenes load") {
  const Scene t5 = load_scene(SPASM_SCENE_DIR "/tetris5.scene.json");
  REQUIRE(t5.tetris() != nullptr);
  CHECK(t5.tetris()->blocks().size() == 5);
  CHECK(t5.robot.has_value());
  const Scene t8 = load_scene(SPASM_SCENE_DIR "/tetris8.scene.json");
  REQUIRE(t8.tetris() != nullptr);
  CHECK(t8.tetris()->blocks().size() == 8);
  const Scene tw = load_scene(SPASM_SCENE_DIR "/tower4_obstacle.scene.json");
  REQUIRE(tw.tower() != nullptr);
  CHECK(tw.tower()->block_count() == 4);
  CHECK(tw.tower()->obstacles().size() > 0);
  const Scene mc = load_scene(SPASM_SCENE_DIR "/motion_corridor.scene.json");
  CHECK(mc.kind == ProblemKind::motion);
  CHECK_FALSE(mc.has_stage1());
  CHECK(mc.task().pinned());
  for (const char* name : {"domino2", "trivial", "motion_empty"}) {
    CHECK_NOTHROW(load_scene(std::string(SPASM_SCENE_DIR "/") + name + ".scene.json"));
  }
}

TEST_CASE("defaults fill omitted fields") {
  const Scene s = parse_scene(kDomino);
  CHECK(s.kind == ProblemKind::tetris);
  CHECK(s.tetris()->weights().block_block == 1.0);
  CHECK(s.tetris()->weights().block_wall == 1.0);
  CHECK(s.tetris()->weights().height == 1.0);
  CHECK(s.tetris()->yaw_mode() == YawMode::fixed);
  CHECK(s.optimizer.sample_batch == 4096);
  CHECK(s.optimizer.optimize_batch == 512);
  CHECK_FALSE(s.robot.has_value());
  CHECK_THROWS_AS(s.task(), SceneError);
}

TEST_CASE("area mismatch names the invariant") {
  const std::string text = R"({
    "problem_type": "tetris",
    "box": {"min": [0, 0, 0], "max": [3, 2, 1]},
    "blocks": [{"name": "a", "cells": [[0, 0], [1, 0]], "cell_size": 1.0}]
  })";
  CHECK(contains(error_of(text), "tight-packing"));
}

TEST_CASE("errors carry the field path") {
  CHECK(contains(error_of("{not json"), "invalid JSON"));
  CHECK(contains(error_of(R"({"problem_type": "maze"})"), "s.problem_type"));

  std::string unknown = kDomino;
  unknown.insert(1, "\"colour\": 1,");
  CHECK(contains(error_of(unknown), "unknown field 'colour'"));

  std::string bad_type = kDomino;
  bad_type.replace(bad_type.find("[2, 2, 1]"), 9, "[2, \"x\", 1]");
  CHECK(contains(error_of(bad_type), "s.box.max[1]"));

  std::string no_cells = kDomino;
  no_cells.replace(no_cells.find("\"cells\": [[0, 0], [1, 0]], "), 27, "");
  CHECK(contains(error_of(no_cells), "s.blocks[0]: missing required field 'cells'"));

  std::string disconnected = kDomino;
  disconnected.replace(disconnected.find("[[0, 0], [1, 0]]"), 16, "[[0, 0], [2, 0]]");
  CHECK(contains(error_of(disconnected), "4-connected"));

  std::string bad_opt = kDomino;
  bad_opt.insert(bad_opt.rfind('}'), R"(, "optimizer": {"sample_batch": 4, "optimize_batch": 8})");
  CHECK(contains(error_of(bad_opt), "s.optimizer"));
}

TEST_CASE("motion scene checks its endpoints") {
  const std::string base = R"({
    "problem_type": "motion",
    "robot": {"planar": {"lengths": [1, 1]}},
    "start": [0, 0],
    "goal": GOAL
  })";
  std::string ok = base;
  ok.replace(ok.find("GOAL"), 4, "[1, 1]");
  const Scene s = parse_scene(ok);
  CHECK(s.motion->goal.size() == 2);

  std::string off = base;
  off.replace(off.find("GOAL"), 4, "[9, 0]");
  CHECK(contains(error_of(off), "joint limits"));

  std::string wrong = base;
  wrong.replace(wrong.find("GOAL"), 4, "[1, 1, 1]");
  CHECK_FALSE(error_of(wrong).empty());
}

TEST_CASE("trajectory settings are read") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/tower4_obstacle.scene.json");
  CHECK(s.trajopt.clearance > 0.0);
  CHECK(s.trajopt.ik.prefer_top_down);
  CHECK(s.trajopt.horizon(true) == s.trajopt.interp * (s.trajopt.waypoints + 3) + 1);
  CHECK(s.trajopt.horizon() == s.trajopt.interp * (s.trajopt.waypoints + 1) + 1);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_scene("/nonexistent/x.scene.json"), SceneError);
}

}  // TEST_SUITE
