// spasm_cli: run the two-stage planner on a scene file and export
// trial tables, N x M sweeps and cost traces.

#include "spasm/bench.hpp"
#include "spasm/parallel.hpp"
#include "spasm/scene.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace spasm;

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailed = 1;
constexpr int kUsage = 2;

struct Flags {
  std::string scene;
  std::optional<std::uint64_t> seed;
  std::size_t trials{100};
  std::vector<std::size_t> n;
  std::vector<std::size_t> m;
  std::optional<int> k_lin;
  std::optional<int> k_quad;
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<int> max_restarts;
  bool quadratic_only{false};
  bool no_trajopt{false};
  std::string warm_start;
  std::string trace;
  std::string out;
  std::string svg;
  std::string from;
  int threads{0};
  bool with_time{false};
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--scene", f.scene, "scene file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "base seed; trial i uses seed + i");
  cmd->add_option("--k-lin", f.k_lin, "linear-cost steps");
  cmd->add_option("--k-quad", f.k_quad, "quadratic-cost steps");
  cmd->add_option("--eta", f.eta, "initial linear-phase learning rate");
  cmd->add_option("--alpha", f.alpha, "quadratic-phase learning rate");
  cmd->add_option("--epsilon", f.epsilon, "satisfaction threshold");
  cmd->add_option("--max-restarts", f.max_restarts, "restart budget");
  cmd->add_flag("--quadratic-only", f.quadratic_only,
                "ablation: skip the linear phase, same total step budget");
  cmd->add_flag("--no-trajopt", f.no_trajopt, "stage 1 only");
  cmd->add_option("--warm-start", f.warm_start, "file of seed particles, one per line")
      ->check(CLI::ExistingFile);
  cmd->add_option("--threads", f.threads, "worker threads (default: SPASM_THREADS or all)")
      ->check(CLI::NonNegativeNumber);
}

void add_batch(CLI::App* cmd, Flags& f) {
  cmd->add_option("--n", f.n, "sampling batch size(s)")->delimiter(',');
  cmd->add_option("--m", f.m, "optimization batch size(s)")->delimiter(',');
}

std::vector<std::vector<double>> read_warm_start(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(path + ": cannot open warm-start file");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw SceneError(path + ": non-numeric value in warm-start row");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

TrialOptions make_options(const Scene& scene, const Flags& f) {
  TrialOptions o;
  o.optimizer = scene.optimizer;
  o.trajopt = scene.trajopt;
  OptimizerConfig& c = o.optimizer;
  if (f.seed) {
    c.seed = *f.seed;
    o.trajopt.seed = *f.seed;
  }
  if (f.n.size() == 1) c.sample_batch = f.n[0];
  if (f.m.size() == 1) c.optimize_batch = f.m[0];
  if (f.k_lin) c.linear_steps = *f.k_lin;
  if (f.k_quad) c.quadratic_steps = *f.k_quad;
  if (f.eta) c.eta_init = *f.eta;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.epsilon) {
    c.epsilon = *f.epsilon;
    o.trajopt.epsilon = *f.epsilon;
  }
  if (f.max_restarts) c.max_restarts = *f.max_restarts;
  if (f.quadratic_only) {
    c.quadratic_steps += c.linear_steps;
    c.linear_steps = 0;
  }
  o.run_trajopt = !f.no_trajopt && scene.robot.has_value();
  if (!f.warm_start.empty()) o.warm_start = read_warm_start(f.warm_start);
  c.validate();
  o.trajopt.validate();
  return o;
}

template <class Write>
void write_file(const std::string& path, Write&& write) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path + ": cannot write");
  write(os);
}

void print_placement(const Scene& scene, const PlacementCostModel& model,
                     std::span<const double> row) {
  const auto poses = model.poses(row);
  const TetrisProblem* tetris = scene.tetris();
  std::printf("%-10s %10s %10s %10s %10s\n", "object", "x", "y", "z", "yaw");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const std::string name =
        tetris ? tetris->blocks()[i].name() : "block" + std::to_string(i);
    std::printf("%-10s %10.5f %10.5f %10.5f %10.5f\n", name.c_str(), poses[i].x, poses[i].y,
                poses[i].z, poses[i].yaw);
  }
}

int cmd_solve(const Scene& scene, const Flags& f) {
  const TrialOptions o = make_options(scene, f);
  std::vector<Endpoints> ends;
  if (scene.has_stage1()) {
    OptimizerConfig c = o.optimizer;
    c.trace = !f.trace.empty();
    const PlacementCostModel model(*scene.placement);
    const SolveResult res = solve(model, c, o.warm_start);
    std::printf("stage 1: %s, %d restart(s), %lld steps, %.1f ms\n",
                res.success ? "solved" : "failed", res.report.restarts_used,
                static_cast<long long>(res.report.steps_used), res.report.wall_ms);
    if (!f.trace.empty()) {
      write_file(f.trace, [&](std::ostream& os) { write_trace_csv(os, res.report.trace); });
    }
    if (!res.success) return kSolverFailed;
    print_placement(scene, model, res.solutions.row(0));
    const PlacementCheck check = check_placement(*scene.placement, model.poses(res.solutions.row(0)));
    std::printf("placement cost %.3g (max penetration %.3g)\n", check.sum_squares,
                check.max_penetration);
    if (!o.run_trajopt) return kOk;
    std::vector<std::vector<Pose>> placements;
    for (std::size_t r = 0; r < res.solutions.rows(); ++r) {
      placements.push_back(model.poses(res.solutions.row(r)));
    }
    const LiftResult lift = lift_placements(scene.task(), placements, o.trajopt, c.seed);
    std::printf("lifted %zu placement(s), %zu unreachable\n", lift.particles.size(), lift.dropped);
    if (lift.failed()) return kSolverFailed;
    ends = lift.particles;
  } else {
    if (!scene.robot || !scene.motion) throw SceneError(scene.name + ": nothing to solve");
    ends.push_back(Endpoints{{scene.motion->start}, {scene.motion->goal}, {}, {}});
  }
  const TrajTask task = scene.task();
  auto batch = init_trajectories(task, ends, o.trajopt, o.trajopt.particles);
  const AlResult al = solve_al(batch, task, o.trajopt);
  std::printf("stage 2: %s, %d outer iteration(s), path length %.4f, max violation %.3g, %.1f ms\n",
              al.success ? "feasible" : "infeasible", al.report.outer_iters, al.cost.path_length,
              al.validation.max_violation, al.report.wall_ms);
  const std::string path = f.out.empty() ? "trajectory.csv" : f.out;
  write_file(path, [&](std::ostream& os) {
    write_trajectory(os, al.trajectory, al.cost, al.validation);
  });
  std::printf("trajectory written to %s\n", path.c_str());
  return al.success ? kOk : kSolverFailed;
}

int cmd_trials(const Scene& scene, const Flags& f) {
  const TrialOptions o = make_options(scene, f);
  const TrialRun run = run_trials(scene, o, f.trials, [](const TrialRecord& r) {
    std::fprintf(stderr, "trial %zu: %s (%d restarts, %.1f ms)\n", r.trial,
                 r.success ? "ok" : "FAIL", r.restarts, r.time_ms);
  });
  const TrialSummary& s = run.summary;
  std::printf("%s: %zu/%zu succeeded (%.1f%%), time %.2f +/- %.2f ms (median %.2f)\n",
              scene.name.c_str(), s.successes, s.trials, 100.0 * s.success_rate, s.mean_ms,
              s.ci95_ms, s.median_ms);
  if (!f.out.empty()) {
    write_file(f.out, [&](std::ostream& os) { write_trials_csv(os, run.records, f.with_time); });
  }
  return s.successes == s.trials ? kOk : kSolverFailed;
}

int cmd_sweep(const Scene* scene, const Flags& f) {
  SweepGrid grid;
  if (!f.from.empty()) {
    std::ifstream in(f.from);
    if (!in) throw std::runtime_error(f.from + ": cannot open");
    grid = read_sweep_csv(in);
  } else {
    if (!scene) throw CLI::RequiredError("--scene");
    TrialOptions o = make_options(*scene, f);
    const std::vector<std::size_t> ns =
        f.n.empty() ? std::vector<std::size_t>{512, 1024, 2048, 4096, 8192} : f.n;
    const std::vector<std::size_t> ms =
        f.m.empty() ? std::vector<std::size_t>{256, 512, 1024} : f.m;
    grid = run_sweep(*scene, o, ns, ms, f.trials, [](const SweepCell& c) {
      if (c.skipped) {
        std::fprintf(stderr, "N=%zu M=%zu skipped (M > N)\n", c.n, c.m);
      } else {
        std::fprintf(stderr, "N=%zu M=%zu: %.0f%% success, %.2f +/- %.2f ms\n", c.n, c.m,
                     100.0 * c.summary.success_rate, c.summary.mean_ms, c.summary.ci95_ms);
      }
    });
    const std::string path = f.out.empty() ? "sweep.csv" : f.out;
    write_file(path, [&](std::ostream& os) { write_sweep_csv(os, grid); });
  }
  if (!f.svg.empty()) {
    write_file(f.svg, [&](std::ostream& os) { write_sweep_svg(os, grid); });
  }
  for (const SweepCell& c : grid.cells) {
    if (!c.skipped && c.summary.successes != c.summary.trials) return kSolverFailed;
  }
  return kOk;
}

int cmd_trace(const Scene& scene, const Flags& f) {
  if (!scene.has_stage1()) throw SceneError(scene.name + ": trace needs a placement problem");
  const TrialOptions o = make_options(scene, f);
  OptimizerConfig c = o.optimizer;
  c.trace = true;
  c.max_restarts = 1;
  const PlacementCostModel model(*scene.placement);
  const SolveResult res = solve(model, c, o.warm_start);
  const std::string path = f.out.empty() ? "trace.csv" : f.out;
  write_file(path, [&](std::ostream& os) { write_trace_csv(os, res.report.trace); });
  if (!f.svg.empty()) {
    write_file(f.svg, [&](std::ostream& os) { write_trace_svg(os, res.report.trace); });
  }
  std::size_t selected = 0, sat_sel = 0, rejected = 0, sat_rej = 0;
  for (const TraceRow& r : res.report.trace) {
    if (r.step != c.total_steps()) continue;
    (r.selected ? selected : rejected) += 1;
    if (r.satisfied) (r.selected ? sat_sel : sat_rej) += 1;
  }
  std::printf("%zu trace rows; satisfied: %zu/%zu selected, %zu/%zu rejected\n",
              res.report.trace.size(), sat_sel, selected, sat_rej, rejected);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage particle planner for sequential pick-and-place"};
  app.require_subcommand(1);
  Flags f;

  auto* solve_cmd = app.add_subcommand("solve", "solve one scene, print placement, write trajectory");
  add_common(solve_cmd, f);
  add_batch(solve_cmd, f);
  solve_cmd->add_option("--out", f.out, "trajectory output (default trajectory.csv)");
  solve_cmd->add_option("--trace", f.trace, "write the first-pass cost trace CSV");

  auto* trials_cmd = app.add_subcommand("trials", "run independent trials");
  add_common(trials_cmd, f);
  add_batch(trials_cmd, f);
  trials_cmd->add_option("--trials", f.trials, "trial count")->check(CLI::PositiveNumber);
  trials_cmd->add_option("--out", f.out, "per-trial CSV");
  trials_cmd->add_flag("--with-time", f.with_time, "add the time_ms column");

  auto* sweep_cmd = app.add_subcommand("sweep", "N x M grid of trial summaries");
  add_common(sweep_cmd, f);
  add_batch(sweep_cmd, f);
  sweep_cmd->add_option("--trials", f.trials, "trials per cell")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", f.out, "grid CSV (default sweep.csv)");
  sweep_cmd->add_option("--svg", f.svg, "heat-map SVG");
  sweep_cmd->add_option("--from", f.from, "plot an existing grid CSV instead of running")
      ->check(CLI::ExistingFile);

  auto* trace_cmd = app.add_subcommand("trace", "per-step cost of sampled particles, one pass");
  add_common(trace_cmd, f);
  add_batch(trace_cmd, f);
  trace_cmd->add_option("--out", f.out, "trace CSV (default trace.csv)");
  trace_cmd->add_option("--svg", f.svg, "cost-evolution SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands()[0]->help());
    return kUsage;
  }

  set_num_threads(f.threads > 0 ? f.threads : threads_from_env());

  try {
    std::optional<Scene> scene;
    if (!f.scene.empty()) {
      scene = load_scene(f.scene);
    } else if (!sweep_cmd->parsed() || f.from.empty()) {
      std::cerr << "--scene is required\n";
      return kUsage;
    }
    if (solve_cmd->parsed()) return cmd_solve(*scene, f);
    if (trials_cmd->parsed()) return cmd_trials(*scene, f);
    if (sweep_cmd->parsed()) return cmd_sweep(scene ? &*scene : nullptr, f);
    return cmd_trace(*scene, f);
  } catch (const SceneError& e) {
    std::cerr << "scene error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailed;
  }
}
