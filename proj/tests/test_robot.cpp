#include "doctest.h"
#include "oracles.hpp"

#include "spasm/parallel.hpp"
#include "spasm/robot.hpp"
#include "spasm/scene.hpp"

#include <numbers>
#include <random>

using namespace spasm;

namespace {

KinematicChain arm7() { return *load_scene(SPASM_SCENE_DIR "/tower4_obstacle.scene.json").robot; }

KinematicChain planar(std::vector<double> lengths) { return KinematicChain::planar(lengths); }

// Rotation vector of Rb * Ra^T.
Vec3 rotation_delta(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
  const Eigen::AngleAxisd aa(Rb * Ra.transpose());
  return aa.axis() * aa.angle();
}

}  // namespace

TEST_SUITE("robot") {

TEST_CASE("planar forward kinematics") {
  const auto c = planar({1.0, 1.0});
  const auto f0 = fk(c, Eigen::Vector2d(0, 0));
  CHECK(f0.tool.translation().x() == doctest::Approx(2.0));
  CHECK(f0.tool.translation().y() == doctest::Approx(0.0));
  const auto f1 = fk(c, Eigen::Vector2d(std::numbers::pi / 2, 0));
  CHECK(f1.tool.translation().x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f1.tool.translation().y() == doctest::Approx(2.0));
  CHECK(f1.ee.yaw == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS_AS(fk(c, Eigen::Vector3d(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("fk matches an explicit matrix product") {
  const auto c = arm7();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto q = oracle::random_q(c, rng);
    const Eigen::Matrix4d ref = oracle::tool_matrix(c, q);
    CHECK((fk(c, q).tool.matrix() - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fk flags limit violations") {
  const auto c = planar({1.0, 1.0});
  CHECK(fk(c, Eigen::Vector2d(0, 0)).within_limits);
  CHECK_FALSE(fk(c, Eigen::Vector2d(3.5, 0)).within_limits);
}

TEST_CASE("link spheres follow their links") {
  const auto c = planar({1.0, 1.0});
  const auto f = fk(c, Eigen::Vector2d(std::numbers::pi / 2, 0));
  REQUIRE(f.spheres.size() == c.sphere_count());
  for (std::size_t k = 0; k < f.spheres.size(); ++k) {
    CHECK(std::abs(f.spheres.centers[k].x()) < 1e-12);
    CHECK(f.spheres.centers[k].y() > 0.0);
  }
}

TEST_CASE("planar jacobian") {
  const auto c = planar({1.0, 1.0});
  const auto J = jacobian(c, Eigen::Vector2d(0, 0));
  CHECK(J(0, 0) == doctest::Approx(0.0));
  CHECK(J(1, 0) == doctest::Approx(2.0));
  CHECK(J(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("jacobian angular columns are world joint axes") {
  const auto c = arm7();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto q = oracle::random_q(c, rng);
    const auto J = jacobian(c, q);
    const auto f = fk(c, q);
    for (std::size_t j = 0; j < c.dof(); ++j) {
      CHECK((J.block<3, 1>(3, static_cast<Eigen::Index>(j)) - f.joint_axes[j]).norm() < 1e-12);
    }
  }
}

TEST_CASE("jacobian matches finite differences") {
  for (const auto& c : {arm7(), planar({1.0, 0.8, 0.5})}) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      const auto q = oracle::random_q(c, rng);
      const auto J = jacobian(c, q);
      const double h = 1e-6;
      std::vector<double> a, b;
      for (Eigen::Index j = 0; j < q.size(); ++j) {
        auto qp = q;
        auto qm = q;
        qp[j] += h;
        qm[j] -= h;
        const Eigen::Matrix4d Tp = oracle::tool_matrix(c, qp);
        const Eigen::Matrix4d Tm = oracle::tool_matrix(c, qm);
        const Vec3 dp = (Tp.block<3, 1>(0, 3) - Tm.block<3, 1>(0, 3)) / (2 * h);
        const Vec3 dw = rotation_delta(Tm.block<3, 3>(0, 0), Tp.block<3, 3>(0, 0)) / (2 * h);
        for (int r = 0; r < 3; ++r) {
          a.push_back(J(r, j));
          b.push_back(dp[r]);
          a.push_back(J(r + 3, j));
          b.push_back(dw[r]);
        }
      }
      CHECK(oracle::rel_err(a, b) < 1e-5);
    }
  }
}

TEST_CASE("point and yaw gradients match finite differences") {
  const auto c = arm7();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const auto q = oracle::random_q(c, rng);
    const Vec3 g(u(rng), u(rng), u(rng));
    const auto f = fk(c, q);
    const int link = static_cast<int>(c.dof()) - 1;
    const Vec3 local(0.1, -0.2, 0.3);
    std::vector<double> grad(c.dof(), 0.0);
    accumulate_point_gradient(f, link, f.tool * local, g, grad);
    const auto yaw = yaw_gradient(f);
    const auto fp = [&](const std::vector<double>& x) {
      const Eigen::Map<const Eigen::VectorXd> qq(x.data(), static_cast<Eigen::Index>(x.size()));
      return g.dot(fk(c, qq).tool * local);
    };
    const auto fy = [&](const std::vector<double>& x) {
      const Eigen::Map<const Eigen::VectorXd> qq(x.data(), static_cast<Eigen::Index>(x.size()));
      // Unwrap around the base yaw so the difference stays continuous.
      return f.ee.yaw + wrap_angle(fk(c, qq).ee.yaw - f.ee.yaw);
    };
    const std::vector<double> x(q.data(), q.data() + q.size());
    CHECK(oracle::rel_err(grad, oracle::central_diff(fp, x)) < 1e-5);
    const std::vector<double> yv(yaw.data(), yaw.data() + yaw.size());
    CHECK(oracle::rel_err(yv, oracle::central_diff(fy, x)) < 1e-5);
  }
}

TEST_CASE("grasp pose composition") {
  GraspSpec g;
  g.approach = {0, 0, 0.2};
  const Pose t0 = grasp_pose(Pose{}, g);
  CHECK(t0.x == 0.0);
  CHECK(t0.y == 0.0);
  CHECK(t0.z == doctest::Approx(0.2));
  CHECK(t0.yaw == 0.0);
  const Pose t1 = grasp_pose(Pose{0, 0, 0, 0.7}, g);
  CHECK(t1.yaw == doctest::Approx(0.7));
  const Pose t2 = grasp_pose(Pose{1, -2, 3, 0}, g);
  CHECK(t2.x == doctest::Approx(1.0));
  CHECK(t2.y == doctest::Approx(-2.0));
  CHECK(t2.z == doctest::Approx(3.2));
  g.approach = {0.1, 0, 0.2};
  const Pose obj{1, 2, 0.5, 1.1};
  const Pose back = object_from_grasp(grasp_pose(obj, g), g);
  CHECK(back.x == doctest::Approx(obj.x));
  CHECK(back.y == doctest::Approx(obj.y));
  CHECK(back.z == doctest::Approx(obj.z));
  CHECK(back.yaw == doctest::Approx(obj.yaw));
  g.approach = {0, 0, -1};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("tool tilt and axis misalignment") {
  Eigen::Isometry3d down = Eigen::Isometry3d::Identity();
  down.linear() = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()).toRotationMatrix();
  CHECK(tool_tilt(down) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(axis_misalignment(down, {0, 0, -1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tool_tilt(Eigen::Isometry3d::Identity()) == doctest::Approx(std::numbers::pi));
  CHECK(axis_misalignment(Eigen::Isometry3d::Identity(), {0, 0, -1}) == doctest::Approx(2.0));
}

TEST_CASE("ik round trip on reachable targets") {
  const auto c = arm7();
  std::mt19937_64 rng(5);
  IkConfig cfg;
  int solved = 0;
  for (int i = 0; i < 50; ++i) {
    const auto q0 = oracle::random_q(c, rng);
    const Pose target = fk(c, q0).ee;
    const auto r = ik_solve(c, target, cfg, static_cast<std::uint64_t>(i));
    if (!r.reachable) continue;
    ++solved;
    CHECK(c.within_limits(r.q));
    const Pose got = fk(c, r.q).ee;
    CHECK((got.translation() - target.translation()).norm() < 1e-4);
    CHECK(std::abs(wrap_angle(got.yaw - target.yaw)) < 1e-3);
  }
  CHECK(solved >= 45);
}

TEST_CASE("ik on a planar workspace grid") {
  // Reachability oracle: closed-form elbow solutions for the wrist point,
  // kept when every joint is inside the limits with some margin.
  const auto c = planar({1.0, 1.0, 0.5});
  const double margin = 0.05;
  const auto inside = [&](double q) { return std::abs(q) < 3.0 - margin; };
  IkConfig cfg;
  int reachable = 0;
  for (double x = -2.4; x <= 2.41; x += 0.4) {
    for (double y = -2.4; y <= 2.41; y += 0.4) {
      const double wx = x - 0.5;
      const double wy = y;
      const double d2 = wx * wx + wy * wy;
      const double cos2 = (d2 - 2.0) / 2.0;
      if (std::abs(cos2) > 1.0 - margin) continue;
      bool ok = false;
      for (double sign : {1.0, -1.0}) {
        const double q2 = sign * std::acos(cos2);
        const double q1 = wrap_angle(std::atan2(wy, wx) - std::atan2(std::sin(q2), 1.0 + std::cos(q2)));
        const double q3 = wrap_angle(-q1 - q2);
        ok = ok || (inside(q1) && inside(q2) && inside(q3));
      }
      if (!ok) continue;
      ++reachable;
      const Pose target{x, y, 0.0, 0.0};
      const auto r = ik_solve(c, target, cfg, 7);
      CHECK(r.reachable);
      CHECK(c.within_limits(r.q));
      CHECK((fk(c, r.q).ee.translation() - target.translation()).norm() < 1e-4);
    }
  }
  CHECK(reachable > 20);
}

TEST_CASE("ik reports unreachable targets") {
  const auto c = planar({1.0, 1.0});
  const auto r = ik_solve(c, Pose{5.0, 0.0, 0.0, 0.0}, IkConfig{}, 1);
  CHECK_FALSE(r.reachable);
  CHECK(c.within_limits(r.q));
  const auto c7 = arm7();
  const auto r7 = ik_solve(c7, Pose{c7.reach() + 1.0, 0.0, 0.0, 0.0}, IkConfig{}, 1);
  CHECK_FALSE(r7.reachable);
}

TEST_CASE("ik batches are deterministic") {
  const auto c = arm7();
  std::mt19937_64 rng(8);
  std::vector<Pose> targets;
  const Pose t = fk(c, oracle::random_q(c, rng)).ee;
  for (int i = 0; i < 6; ++i) targets.push_back(t);
  const auto a = ik_solve(c, t, IkConfig{}, 42);
  const auto b = ik_solve(c, t, IkConfig{}, 42);
  CHECK(a.q == b.q);
  set_num_threads(1);
  const auto s1 = ik_solve_batch(c, targets, IkConfig{}, 3);
  set_num_threads(4);
  const auto s4 = ik_solve_batch(c, targets, IkConfig{}, 3);
  set_num_threads(0);
  for (std::size_t i = 0; i < targets.size(); ++i) CHECK(s1[i].q == s4[i].q);
}

TEST_CASE("top-down preference") {
  const auto c = arm7();
  IkConfig cfg;
  cfg.prefer_top_down = true;
  // A block on the table in front of the arm.
  GraspSpec g;
  g.approach = {0, 0, 1.0};
  const Pose target = grasp_pose(Pose{8.0, 2.0, 0.5, 0.3}, g);
  const auto r = ik_solve(c, target, cfg, 1);
  REQUIRE(r.reachable);
  CHECK(r.tilt < cfg.tilt_tol);
  const auto refined = ik_refine(c, grasp_pose(Pose{8.0, 2.0, 1.0, 0.3}, g), cfg, r.q);
  CHECK(refined.reachable);
  CHECK(refined.tilt < 1e-2);
}

TEST_CASE("chain construction checks") {
  Joint j;
  j.lower = 1.0;
  j.upper = 0.0;
  CHECK_THROWS_AS(KinematicChain({j}, {LinkSpheres{}}), std::invalid_argument);
  Joint k;
  k.axis = {0, 0, 2};
  CHECK_THROWS_AS(KinematicChain({k}, {LinkSpheres{}}), std::invalid_argument);
  CHECK_THROWS_AS(KinematicChain({Joint{}}, {}), std::invalid_argument);
}

}  // TEST_SUITE
