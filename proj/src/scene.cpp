#include "spasm/scene.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace spasm {

using nlohmann::json;

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::tetris: return "tetris";
    case ProblemKind::tower: return "tower";
    case ProblemKind::motion: return "motion";
  }
  return "?";
}

const TetrisProblem* Scene::tetris() const {
  return dynamic_cast<const TetrisProblem*>(placement.get());
}

const TowerProblem* Scene::tower() const {
  return dynamic_cast<const TowerProblem*>(placement.get());
}

TrajTask Scene::task() const {
  if (!robot) throw SceneError(name + ": scene has no robot");
  TrajTask t;
  t.chain = &*robot;
  t.placement = placement.get();
  t.motion = motion.get();
  t.grasp = grasp;
  return t;
}

namespace {

// A JSON value plus the path used in error messages.
struct Node {
  const json& v;
  std::string path;

  [[noreturn]] void fail(const std::string& msg) const { throw SceneError(path + ": " + msg); }

  Node at(const std::string& key) const {
    if (!v.contains(key)) fail("missing required field '" + key + "'");
    return {v.at(key), path + "." + key};
  }
  Node at(std::size_t i) const { return {v.at(i), path + "[" + std::to_string(i) + "]"}; }
  bool has(const std::string& key) const { return v.is_object() && v.contains(key); }

  const Node& object(std::initializer_list<const char*> allowed) const {
    if (!v.is_object()) fail("expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : v.items()) {
      if (!ok.count(k)) fail("unknown field '" + k + "'");
    }
    return *this;
  }
  std::size_t array(std::size_t min_size = 0) const {
    if (!v.is_array()) fail("expected an array");
    if (v.size() < min_size) fail("expected at least " + std::to_string(min_size) + " entries");
    return v.size();
  }
  double number() const {
    if (!v.is_number()) fail("expected a number");
    return v.get<double>();
  }
  double positive() const {
    const double x = number();
    if (!(x > 0.0)) fail("must be > 0");
    return x;
  }
  int integer() const {
    if (!v.is_number_integer()) fail("expected an integer");
    return v.get<int>();
  }
  std::size_t count() const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }
  bool boolean() const {
    if (!v.is_boolean()) fail("expected true or false");
    return v.get<bool>();
  }
  std::string string() const {
    if (!v.is_string()) fail("expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(std::size_t n = 0) const {
    array();
    if (n != 0 && v.size() != n) fail("expected " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(at(i).number());
    return out;
  }
  Vec3 vec3() const {
    const auto x = numbers(3);
    return {x[0], x[1], x[2]};
  }
  Pose pose() const {
    const auto x = numbers(4);
    return Pose{x[0], x[1], x[2], x[3]}.normalized();
  }
  std::vector<Vec3> points() const {
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < array(); ++i) out.push_back(at(i).vec3());
    return out;
  }
};

template <class T, class F>
void optional(const Node& n, const char* key, T& out, F read) {
  if (n.has(key)) out = read(n.at(key));
}

Aabb read_box(const Node& n) {
  n.object({"min", "max"});
  Aabb box{n.at("min").vec3(), n.at("max").vec3()};
  if (!box.valid()) n.fail("min must be <= max componentwise");
  return box;
}

SphereSet read_spheres(const Node& n) {
  const auto centers = n.at("centers").points();
  const Node r = n.at("radii");
  const auto radii = r.numbers();
  if (radii.size() != centers.size()) r.fail("expected one radius per center");
  try {
    return SphereSet(centers, radii);
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

std::vector<TowerProblem::Obstacle> read_obstacles(const Node& n) {
  std::vector<TowerProblem::Obstacle> out;
  for (std::size_t i = 0; i < n.array(); ++i) {
    const Node o = n.at(i);
    o.object({"name", "centers", "radii", "pose"});
    TowerProblem::Obstacle ob{read_spheres(o), Pose{}};
    optional(o, "pose", ob.pose, [](const Node& p) { return p.pose(); });
    out.push_back(std::move(ob));
  }
  return out;
}

std::vector<Pose> read_poses(const Node& n) {
  std::vector<Pose> out;
  for (std::size_t i = 0; i < n.array(); ++i) out.push_back(n.at(i).pose());
  return out;
}

Eigen::Isometry3d read_transform(const Node& n) {
  n.object({"translation", "rpy"});
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (n.has("translation")) t.translation() = n.at("translation").vec3();
  if (n.has("rpy")) {
    const Vec3 rpy = n.at("rpy").vec3();
    t.linear() = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
  }
  return t;
}

KinematicChain read_robot(const Node& n) {
  n.object({"name", "planar", "joints", "link_spheres", "tool_offset", "base", "home"});
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  if (n.has("base")) base = read_transform(n.at("base"));
  std::optional<KinematicChain> chain;
  if (n.has("planar")) {
    const Node p = n.at("planar");
    p.object({"lengths", "sphere_radius"});
    const auto lengths = p.at("lengths").numbers();
    if (lengths.empty()) p.at("lengths").fail("expected at least 1 entry");
    double radius = 0.05;
    optional(p, "sphere_radius", radius, [](const Node& x) { return x.positive(); });
    const KinematicChain planar = KinematicChain::planar(lengths, radius);
    chain = KinematicChain(planar.joints(), planar.link_spheres(), planar.tool(), base);
  } else {
    const Node js = n.at("joints");
    std::vector<Joint> joints;
    for (std::size_t i = 0; i < js.array(1); ++i) {
      const Node j = js.at(i);
      j.object({"name", "axis", "offset", "limits"});
      Joint jt;
      jt.axis = j.at("axis").vec3();
      if (jt.axis.norm() == 0.0) j.at("axis").fail("axis must be nonzero");
      jt.axis.normalize();
      optional(j, "offset", jt.offset, [](const Node& x) { return x.vec3(); });
      const auto lim = j.at("limits").numbers(2);
      jt.lower = lim[0];
      jt.upper = lim[1];
      if (!(jt.lower < jt.upper)) j.at("limits").fail("lower must be below upper");
      joints.push_back(jt);
    }
    std::vector<LinkSpheres> links(joints.size());
    if (n.has("link_spheres")) {
      const Node ls = n.at("link_spheres");
      if (ls.array() != joints.size()) ls.fail("expected one entry per joint");
      for (std::size_t i = 0; i < joints.size(); ++i) {
        const Node l = ls.at(i);
        l.object({"centers", "radii"});
        links[i].centers = l.at("centers").points();
        links[i].radii = l.at("radii").numbers();
        if (links[i].radii.size() != links[i].centers.size()) {
          l.at("radii").fail("expected one radius per center");
        }
        for (double r : links[i].radii) {
          if (!(r > 0.0)) l.at("radii").fail("radii must be > 0");
        }
      }
    }
    Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();
    if (n.has("tool_offset")) tool = read_transform(n.at("tool_offset"));
    try {
      chain = KinematicChain(std::move(joints), std::move(links), tool, base);
    } catch (const std::invalid_argument& e) {
      n.fail(e.what());
    }
  }
  if (n.has("home")) {
    const Node h = n.at("home");
    const auto q = h.numbers(chain->dof());
    chain->home = Eigen::Map<const JointVector>(q.data(), static_cast<Eigen::Index>(q.size()));
  }
  return *chain;
}

GraspSpec read_grasp(const Node& n) {
  n.object({"approach", "yaw_offset", "tool_axis"});
  GraspSpec g;
  optional(n, "approach", g.approach, [](const Node& x) { return x.vec3(); });
  optional(n, "yaw_offset", g.yaw_offset, [](const Node& x) { return x.number(); });
  if (n.has("tool_axis")) {
    Vec3 a = n.at("tool_axis").vec3();
    if (a.norm() == 0.0) n.at("tool_axis").fail("must be nonzero");
    g.tool_axis = a.normalized();
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
  return g;
}

void read_optimizer(const Node& n, OptimizerConfig& c) {
  n.object({"sample_batch", "optimize_batch", "linear_steps", "quadratic_steps", "eta_init",
            "alpha", "epsilon", "solutions", "max_restarts", "step_cap"});
  const auto cnt = [](const Node& x) { return x.count(); };
  const auto num = [](const Node& x) { return x.number(); };
  const auto integer = [](const Node& x) { return x.integer(); };
  optional(n, "sample_batch", c.sample_batch, cnt);
  optional(n, "optimize_batch", c.optimize_batch, cnt);
  optional(n, "linear_steps", c.linear_steps, integer);
  optional(n, "quadratic_steps", c.quadratic_steps, integer);
  optional(n, "eta_init", c.eta_init, num);
  optional(n, "alpha", c.alpha, num);
  optional(n, "epsilon", c.epsilon, num);
  optional(n, "solutions", c.solutions, cnt);
  optional(n, "max_restarts", c.max_restarts, integer);
  optional(n, "step_cap", c.step_cap, [](const Node& x) { return static_cast<std::int64_t>(x.count()); });
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

void read_trajopt(const Node& n, TrajOptConfig& c) {
  n.object({"waypoints", "interp", "w_start", "w_arm", "w_block", "mu0", "beta", "mu_max",
            "outer_iters", "polish_iters", "inner_steps", "lr_start", "lr_end", "max_step",
            "max_edge", "clearance", "contact_tolerance", "epsilon", "align_tol", "particles",
            "ik"});
  const auto num = [](const Node& x) { return x.number(); };
  const auto integer = [](const Node& x) { return x.integer(); };
  optional(n, "waypoints", c.waypoints, integer);
  optional(n, "interp", c.interp, integer);
  optional(n, "w_start", c.w_start, num);
  optional(n, "w_arm", c.w_arm, num);
  optional(n, "w_block", c.w_block, num);
  optional(n, "mu0", c.mu0, num);
  optional(n, "beta", c.beta, num);
  optional(n, "mu_max", c.mu_max, num);
  optional(n, "outer_iters", c.outer_iters, integer);
  optional(n, "polish_iters", c.polish_iters, integer);
  optional(n, "inner_steps", c.inner_steps, integer);
  optional(n, "lr_start", c.lr_start, num);
  optional(n, "lr_end", c.lr_end, num);
  optional(n, "max_step", c.max_step, num);
  optional(n, "max_edge", c.max_edge, num);
  optional(n, "clearance", c.clearance, num);
  optional(n, "contact_tolerance", c.contact_tolerance, num);
  optional(n, "epsilon", c.epsilon, num);
  optional(n, "align_tol", c.align_tol, num);
  optional(n, "particles", c.particles, [](const Node& x) { return x.count(); });
  if (n.has("ik")) {
    const Node k = n.at("ik");
    k.object({"damping", "max_iters", "restarts", "position_tol", "yaw_tol", "prefer_top_down",
              "tilt_tol"});
    optional(k, "damping", c.ik.damping, num);
    optional(k, "max_iters", c.ik.max_iters, integer);
    optional(k, "restarts", c.ik.restarts, integer);
    optional(k, "position_tol", c.ik.position_tol, num);
    optional(k, "yaw_tol", c.ik.yaw_tol, num);
    optional(k, "prefer_top_down", c.ik.prefer_top_down, [](const Node& x) { return x.boolean(); });
    optional(k, "tilt_tol", c.ik.tilt_tol, num);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

std::vector<Cell> read_cells(const Node& n) {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < n.array(1); ++i) {
    const Node c = n.at(i);
    if (!c.v.is_array() || c.v.size() != 2 || !c.v[0].is_number_integer() ||
        !c.v[1].is_number_integer()) {
      c.fail("expected an [x, y] integer pair");
    }
    out.push_back({c.v[0].get<int>(), c.v[1].get<int>()});
  }
  return out;
}

std::shared_ptr<const TetrisProblem> read_tetris(const Node& root) {
  const Node blocks = root.at("blocks");
  std::vector<BlockShape> shapes;
  std::vector<double> yaws;
  std::vector<Pose> initial;
  bool any_initial = false;
  for (std::size_t i = 0; i < blocks.array(1); ++i) {
    const Node b = blocks.at(i);
    b.object({"name", "cells", "cell_size", "yaw", "initial_pose"});
    std::string name = "block" + std::to_string(i);
    optional(b, "name", name, [](const Node& x) { return x.string(); });
    const auto cells = read_cells(b.at("cells"));
    const double cell = b.at("cell_size").positive();
    try {
      shapes.emplace_back(name, cells, cell);
    } catch (const std::invalid_argument& e) {
      b.fail(e.what());
    }
    if (i > 0 && cell != shapes.front().cell_size()) {
      b.at("cell_size").fail("all blocks must share one cell_size");
    }
    yaws.push_back(b.has("yaw") ? b.at("yaw").number() : 0.0);
    if (b.has("initial_pose")) {
      any_initial = true;
      initial.push_back(b.at("initial_pose").pose());
    } else {
      initial.push_back(Pose{});
    }
  }
  if (!any_initial) initial.clear();
  if (root.has("initial_poses")) {
    const Node ip = root.at("initial_poses");
    initial = read_poses(ip);
    if (initial.size() != shapes.size()) ip.fail("expected one pose per block");
  }
  const Aabb box = read_box(root.at("box"));
  double z_star = box.min.z();
  optional(root, "z_star", z_star, [](const Node& x) { return x.number(); });
  YawMode mode = YawMode::fixed;
  if (root.has("yaw_mode")) {
    const Node m = root.at("yaw_mode");
    const std::string s = m.string();
    if (s == "fixed") {
      mode = YawMode::fixed;
    } else if (s == "quantized_free") {
      mode = YawMode::quantized_free;
    } else {
      m.fail("expected 'fixed' or 'quantized_free'");
    }
  }
  TetrisWeights w;
  if (root.has("weights")) {
    const Node n = root.at("weights");
    n.object({"block_block", "block_wall", "height"});
    const auto nonneg = [](const Node& x) {
      const double v = x.number();
      if (v < 0.0) x.fail("must be >= 0");
      return v;
    };
    optional(n, "block_block", w.block_block, nonneg);
    optional(n, "block_wall", w.block_wall, nonneg);
    optional(n, "height", w.height, nonneg);
  }
  if (root.has("obstacles")) root.at("obstacles").fail("tetris scenes take walls from the box, not obstacles");
  try {
    return std::make_shared<TetrisProblem>(std::move(shapes), box, z_star, mode, w, yaws,
                                           std::move(initial));
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
}

std::shared_ptr<const TowerProblem> read_tower(const Node& root) {
  const Node t = root.at("tower");
  t.object({"num_blocks", "block_size", "table_height", "region"});
  const int n = t.at("num_blocks").integer();
  if (n < 2) t.at("num_blocks").fail("must be >= 2");
  const double h = t.at("block_size").positive();
  double table = 0.0;
  optional(t, "table_height", table, [](const Node& x) { return x.number(); });
  const Aabb region = read_box(t.at("region"));
  std::vector<TowerProblem::Obstacle> obstacles;
  if (root.has("obstacles")) obstacles = read_obstacles(root.at("obstacles"));
  TowerWeights w;
  if (root.has("weights")) {
    const Node ws = root.at("weights");
    ws.object({"stable", "height", "collision"});
    const auto nonneg = [](const Node& x) {
      const double v = x.number();
      if (v < 0.0) x.fail("must be >= 0");
      return v;
    };
    optional(ws, "stable", w.stable, nonneg);
    optional(ws, "height", w.height, nonneg);
    optional(ws, "collision", w.collision, nonneg);
  }
  std::vector<Pose> initial;
  if (root.has("initial_poses")) {
    const Node ip = root.at("initial_poses");
    initial = read_poses(ip);
    if (initial.size() != static_cast<std::size_t>(n)) ip.fail("expected one pose per block");
  }
  try {
    return std::make_shared<TowerProblem>(n, h, region, std::move(obstacles), table, w,
                                          std::move(initial));
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
}

std::shared_ptr<const MotionProblem> read_motion(const Node& root, const KinematicChain& chain) {
  auto m = std::make_shared<MotionProblem>();
  const auto to_q = [](const std::vector<double>& v) {
    return JointVector(Eigen::Map<const JointVector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  m->start = to_q(root.at("start").numbers(chain.dof()));
  m->goal = to_q(root.at("goal").numbers(chain.dof()));
  if (root.has("obstacles")) {
    for (const auto& o : read_obstacles(root.at("obstacles"))) {
      m->obstacles.append(place(o.spheres, o.pose));
    }
  }
  try {
    m->validate(chain);
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
  return m;
}

}  // namespace

Scene parse_scene(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SceneError(origin + ": invalid JSON: " + e.what());
  }
  const Node root{doc, origin};
  root.object({"name", "description", "problem_type", "blocks", "box", "z_star", "yaw_mode",
               "weights", "obstacles", "robot", "grasp", "start", "goal", "initial_poses",
               "tower", "optimizer", "trajopt"});
  Scene scene;
  scene.name = origin;
  optional(root, "name", scene.name, [](const Node& x) { return x.string(); });

  const Node kind = root.at("problem_type");
  const std::string k = kind.string();
  if (k == "tetris") {
    scene.kind = ProblemKind::tetris;
  } else if (k == "tower") {
    scene.kind = ProblemKind::tower;
  } else if (k == "motion") {
    scene.kind = ProblemKind::motion;
  } else {
    kind.fail("expected one of tetris, tower, motion");
  }

  const auto forbid = [&root](std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
      if (root.has(key)) root.at(key).fail("not used by this problem_type");
    }
  };
  if (root.has("robot")) scene.robot = read_robot(root.at("robot"));
  if (root.has("grasp")) scene.grasp = read_grasp(root.at("grasp"));

  switch (scene.kind) {
    case ProblemKind::tetris:
      forbid({"tower", "start", "goal"});
      scene.placement = read_tetris(root);
      break;
    case ProblemKind::tower:
      forbid({"blocks", "box", "z_star", "yaw_mode", "start", "goal"});
      scene.placement = read_tower(root);
      break;
    case ProblemKind::motion:
      forbid({"blocks", "box", "z_star", "yaw_mode", "weights", "initial_poses", "tower"});
      if (!scene.robot) root.fail("motion scenes need a robot");
      scene.motion = read_motion(root, *scene.robot);
      break;
  }
  if (root.has("optimizer")) read_optimizer(root.at("optimizer"), scene.optimizer);
  if (root.has("trajopt")) read_trajopt(root.at("trajopt"), scene.trajopt);
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path);
}

}  // namespace spasm
