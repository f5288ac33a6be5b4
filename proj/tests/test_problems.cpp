#include "doctest.h"
#include "oracles.hpp"

#include "spasm/particle_opt.hpp"
#include "spasm/problems.hpp"
#include "spasm/scene.hpp"

#include <numbers>
#include <random>

using namespace spasm;

namespace {

BlockShape domino(const std::string& name) { return BlockShape(name, {{0, 0}, {1, 0}}, 1.0); }

TetrisProblem dominoes(TetrisWeights w = {}) {
  return TetrisProblem({domino("a"), domino("b")}, Aabb{{0, 0, 0}, {2, 2, 1}}, 0.0,
                       YawMode::fixed, w);
}

TowerProblem tower(int n, TowerWeights w = {}, std::vector<TowerProblem::Obstacle> obs = {}) {
  return TowerProblem(n, 1.0, Aabb{{-2, -2, 0}, {2, 2, 10}}, std::move(obs), 0.0, w);
}

std::vector<Pose> stack(const TowerProblem& t) {
  std::vector<Pose> p;
  for (int i = 0; i < t.block_count(); ++i) p.push_back({0.0, 0.0, t.target_height(static_cast<std::size_t>(i)), 0.0});
  return p;
}

std::vector<double> random_x(const CostModel& m, std::mt19937_64& rng, double pad = 0.0) {
  std::vector<double> x(m.dimension());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Bounds& b = m.bounds()[k];
    std::uniform_real_distribution<double> u(b.lower - pad, b.upper + pad);
    x[k] = b.upper > b.lower ? u(rng) : b.lower;
  }
  return x;
}

// Smallest |pen| across every sphere pair the cost touches.
double kink_distance(const PlacementProblem& p, const std::vector<Pose>& poses) {
  std::vector<WorldSpheres> w;
  for (std::size_t i = 0; i < poses.size(); ++i) w.push_back(oracle::world(p.object_geometry(i), poses[i]));
  double g = INFINITY;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = i + 1; j < w.size(); ++j) g = std::min(g, oracle::min_abs_gap(w[i], w[j]));
    if (const auto* t = dynamic_cast<const TetrisProblem*>(&p)) {
      for (const auto& wall : t->walls()) g = std::min(g, oracle::min_abs_gap(w[i], wall));
    } else if (p.obstacles().size() > 0) {
      g = std::min(g, oracle::min_abs_gap(w[i], p.obstacles()));
    }
  }
  return g;
}

void check_gradient(const PlacementProblem& problem, std::uint64_t seed, double pad) {
  const PlacementCostModel m(problem);
  std::mt19937_64 rng(seed);
  int tested = 0;
  while (tested < 100) {
    const auto x = random_x(m, rng, pad);
    if (kink_distance(problem, m.poses(x)) < 1e-3) continue;
    ++tested;
    for (CostMode mode : {CostMode::linear, CostMode::quadratic}) {
      std::vector<double> g(x.size());
      m.cost_gradient(x, mode, g);
      const auto fd = oracle::central_diff([&](const std::vector<double>& y) { return m.cost(y, mode); }, x);
      const double err = oracle::rel_err(g, fd);
      CHECK(err < 1e-5);
    }
  }
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("block shapes reject malformed cells") {
  CHECK_THROWS_AS(BlockShape("e", {}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BlockShape("d", {{0, 0}, {0, 0}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BlockShape("c", {{0, 0}, {1, 1}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(BlockShape("z", {{0, 0}}, 0.0), std::invalid_argument);
  const BlockShape ok("t", {{0, 0}, {1, 0}, {2, 0}, {1, 1}}, 1.0);
  CHECK(ok.spheres().size() == 4);
  CHECK(ok.area() == 4.0);
  for (double r : ok.spheres().radii()) CHECK(r == 0.5);
  for (const Vec3& c : ok.spheres().centers()) CHECK(c.z() == 0.5);
}

TEST_CASE("tight packing invariant is enforced") {
  try {
    TetrisProblem({domino("a")}, Aabb{{0, 0, 0}, {2, 2, 1}}, 0.0, YawMode::fixed);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("tight-packing") != std::string::npos);
  }
}

TEST_CASE("single block filling its box costs nothing") {
  const TetrisProblem p({BlockShape("u", {{0, 0}}, 1.0)}, Aabb{{0, 0, 0}, {1, 1, 1}}, 0.0,
                        YawMode::fixed);
  const std::vector<Pose> poses{{0.5, 0.5, 0.0, 0.0}};
  CHECK(tetris_cost(p, poses, CostMode::linear) == 0.0);
  CHECK(tetris_cost(p, poses, CostMode::quadratic) == 0.0);
}

TEST_CASE("identical blocks at identical poses cost their self overlap") {
  TetrisWeights w;
  w.block_block = 2.5;
  const auto p = dominoes(w);
  const std::vector<Pose> poses{{1, 1, 0, 0}, {1, 1, 0, 0}};
  const double overlap = oracle::pen_sum(oracle::world(p.blocks()[0].spheres(), poses[0]),
                                         oracle::world(p.blocks()[1].spheres(), poses[1]), false);
  CHECK(overlap > 0.0);
  CHECK(tetris_cost(p, poses, CostMode::linear) == doctest::Approx(2.5 * overlap));
}

TEST_CASE("domino tight packing is satisfying and found by grid enumeration") {
  const auto p = dominoes();
  const std::vector<Pose> packed{{1, 0.5, 0, 0}, {1, 1.5, 0, 0}};
  CHECK(tetris_cost(p, packed, CostMode::quadratic) < 1e-3);
  const auto grid = oracle::enumerate_grid(p, 0.05, 1e-3);
  REQUIRE(grid.size() >= 2);
  bool has_packed = false;
  for (const auto& s : grid) {
    has_packed = has_packed || (std::abs(s.poses[0].y - 0.5) < 1e-9 && std::abs(s.poses[1].y - 1.5) < 1e-9);
    // Every grid solution stacks the two dominoes in separate rows.
    CHECK(std::abs(std::abs(s.poses[0].y - s.poses[1].y) - 1.0) < 0.06);
  }
  CHECK(has_packed);
}

TEST_CASE("quadratic tetris cost is the sum of squared terms") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/tetris5.scene.json");
  const PlacementCostModel m(*s.placement);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_x(m, rng, 0.5);
    const auto poses = m.poses(x);
    CHECK(tetris_cost(*s.tetris(), poses, CostMode::quadratic) ==
          doctest::Approx(oracle::tetris_sum_squares(*s.tetris(), poses)).epsilon(1e-12));
    CHECK(check_tetris(*s.tetris(), poses).sum_squares ==
          doctest::Approx(oracle::tetris_sum_squares(*s.tetris(), poses)).epsilon(1e-12));
    CHECK(tetris_cost(*s.tetris(), poses, CostMode::linear) >= 0.0);
  }
}

TEST_CASE("swapping identical blocks leaves the cost unchanged") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/domino2.scene.json");
  const auto& t = *s.tetris();
  // Blocks 0 and 1 share a shape and a fixed yaw.
  REQUIRE(t.blocks()[0].cells() == t.blocks()[1].cells());
  REQUIRE(t.fixed_yaw(0) == t.fixed_yaw(1));
  const PlacementCostModel m(t);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    auto poses = m.poses(random_x(m, rng));
    const double c = tetris_cost(t, poses, CostMode::linear);
    std::swap(poses[0], poses[1]);
    CHECK(tetris_cost(t, poses, CostMode::linear) == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("tower costs") {
  TowerWeights w;
  w.stable = 3.0;
  w.height = 2.0;
  const auto t = tower(3, w);
  auto p = stack(t);
  CHECK(tower_placement_cost(t, p, CostMode::linear) == 0.0);
  CHECK(tower_placement_cost(t, p, CostMode::quadratic) == 0.0);

  auto raised = p;
  raised[2].z += 1.0;
  CHECK(tower_placement_cost(t, raised, CostMode::linear) == doctest::Approx(2.0));

  auto shifted = p;
  shifted[2].x = 0.6;
  CHECK(tower_placement_cost(t, shifted, CostMode::linear) == doctest::Approx(3.0 * 0.1));
  CHECK(tower_placement_cost(t, shifted, CostMode::quadratic) == doctest::Approx(3.0 * 0.01));
  CHECK(check_tower(t, shifted).max_stability_error == doctest::Approx(0.1));
}

TEST_CASE("tower obstacles and collisions count") {
  const SphereSet ball({{0, 0, 0}}, {0.5});
  const auto t = tower(2, {}, {{ball, Pose{0.0, 0.0, 0.5, 0.0}}});
  const auto p = stack(t);
  const double expected = oracle::pen_sum(oracle::world(t.object_geometry(0), p[0]), t.obstacles(), false) +
                          oracle::pen_sum(oracle::world(t.object_geometry(1), p[1]), t.obstacles(), false);
  CHECK(expected > 0.0);
  CHECK(tower_placement_cost(t, p, CostMode::linear) == doctest::Approx(expected));
}

TEST_CASE("tower construction checks") {
  CHECK_THROWS_AS(TowerProblem(1, 1.0, Aabb{{0, 0, 0}, {1, 1, 1}}, {}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TowerProblem(3, 0.0, Aabb{{0, 0, 0}, {1, 1, 1}}, {}, 0.0), std::invalid_argument);
}

TEST_CASE("square distance") {
  CHECK(square_distance(0.2, 0.1, 0, 0, 0.5) == 0.0);
  CHECK(square_distance(0.6, 0.0, 0, 0, 0.5) == doctest::Approx(0.1));
  CHECK(square_distance(0.8, 0.9, 0, 0, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("cost model dimensions") {
  std::vector<BlockShape> five;
  for (int i = 0; i < 5; ++i) five.push_back(domino("d" + std::to_string(i)));
  const TetrisProblem free5(five, Aabb{{0, 0, 0}, {5, 2, 1}}, 0.0, YawMode::quantized_free);
  CHECK(as_cost_model(free5)->dimension() == 20);
  const auto t10 = tower(10);
  CHECK(as_cost_model(t10)->dimension() == 30);
}

TEST_CASE("quantized yaw samples land on quarter turns") {
  std::vector<BlockShape> five;
  for (int i = 0; i < 5; ++i) five.push_back(domino("d" + std::to_string(i)));
  const TetrisProblem free5(five, Aabb{{0, 0, 0}, {5, 2, 1}}, 0.0, YawMode::quantized_free);
  const PlacementCostModel m(free5);
  const auto b = sample_uniform(m, 200, 1, 0);
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t k = 3; k < m.dimension(); k += 4) {
      const double q = b.row(i)[k] / (std::numbers::pi / 2);
      CHECK(std::abs(q - std::round(q)) < 1e-12);
    }
  }
}

TEST_CASE("encode and poses round trip") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/tetris5.scene.json");
  const PlacementCostModel m(*s.placement);
  std::mt19937_64 rng(6);
  const auto x = random_x(m, rng);
  CHECK(m.encode(m.poses(x)) == x);
  const auto poses = m.poses(x);
  for (std::size_t i = 0; i < poses.size(); ++i) CHECK(poses[i].yaw == doctest::Approx(wrap_angle(s.tetris()->fixed_yaw(i))));
}

TEST_CASE("tetris gradient matches finite differences (fixed yaw)") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/tetris5.scene.json");
  check_gradient(*s.placement, 31, 0.5);
}

TEST_CASE("tetris gradient matches finite differences (free yaw)") {
  const std::vector<BlockShape> blocks{
      BlockShape("L", {{0, 0}, {1, 0}, {2, 0}, {2, 1}}, 1.0),
      BlockShape("S", {{0, 0}, {1, 0}, {1, 1}, {2, 1}}, 1.0),
      BlockShape("O", {{0, 0}, {1, 0}, {0, 1}, {1, 1}}, 1.0)};
  const TetrisProblem p(blocks, Aabb{{0, 0, 0}, {4, 3, 1}}, 0.0, YawMode::quantized_free);
  check_gradient(p, 32, 0.3);
}

TEST_CASE("tower gradient matches finite differences") {
  const Scene s = load_scene(SPASM_SCENE_DIR "/tower4_obstacle.scene.json");
  check_gradient(*s.placement, 33, 0.5);
  const auto t = tower(4);
  check_gradient(t, 34, 0.0);
}

TEST_CASE("motion problem validation") {
  const std::vector<double> len{1.0, 1.0};
  const auto chain = KinematicChain::planar(len);
  MotionProblem m;
  m.start = Eigen::Vector2d(0.0, 0.0);
  m.goal = Eigen::Vector2d(1.0, 1.0);
  CHECK_NOTHROW(m.validate(chain));
  m.goal = Eigen::Vector3d(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(m.validate(chain), std::invalid_argument);
  m.goal = Eigen::Vector2d(5.0, 0.0);
  CHECK_THROWS_AS(m.validate(chain), std::invalid_argument);
}

}  // TEST_SUITE
