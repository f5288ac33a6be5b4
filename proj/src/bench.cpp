#include "spasm/bench.hpp"

#include "spasm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spasm {

namespace {

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double ci95_half_width(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

TrialSummary summarize(std::span<const TrialRecord> records) {
  TrialSummary s;
  s.trials = records.size();
  if (records.empty()) return s;
  std::vector<double> times;
  for (const TrialRecord& r : records) {
    s.successes += r.success ? 1 : 0;
    times.push_back(r.time_ms);
  }
  s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.trials);
  s.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
  s.ci95_ms = ci95_half_width(times);
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  s.median_ms = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  return s;
}

TrialRecord run_trial(const Scene& scene, const TrialOptions& options, std::size_t index) {
  TrialRecord rec;
  rec.trial = index;
  rec.seed = options.optimizer.seed + index;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<Endpoints> ends;
  if (scene.has_stage1()) {
    OptimizerConfig cfg = options.optimizer;
    cfg.seed = rec.seed;
    cfg.trace = false;
    const PlacementCostModel model(*scene.placement);
    const SolveResult res = solve(model, cfg, options.warm_start);
    rec.restarts = res.report.restarts_used;
    rec.steps = res.report.steps_used;
    if (!res.success) {
      rec.final_cost = std::numeric_limits<double>::quiet_NaN();
      rec.time_ms = elapsed_ms(t0);
      return rec;
    }
    const auto poses = model.poses(res.solutions.row(0));
    const PlacementCheck check = check_placement(*scene.placement, poses);
    rec.final_cost = check.sum_squares;
    rec.success = check.satisfied(cfg.epsilon);
    if (!rec.success || !options.run_trajopt || !scene.robot) {
      rec.time_ms = elapsed_ms(t0);
      return rec;
    }
    std::vector<std::vector<Pose>> placements;
    for (std::size_t r = 0; r < res.solutions.rows(); ++r) {
      placements.push_back(model.poses(res.solutions.row(r)));
    }
    const LiftResult lift = lift_placements(scene.task(), placements, options.trajopt, rec.seed);
    if (lift.failed()) {
      rec.success = false;
      rec.time_ms = elapsed_ms(t0);
      return rec;
    }
    ends = lift.particles;
  } else {
    if (!scene.motion || !scene.robot) throw SceneError(scene.name + ": nothing to solve");
    ends.push_back(Endpoints{{scene.motion->start}, {scene.motion->goal}, {}, {}});
  }

  TrajOptConfig tc = options.trajopt;
  tc.seed = rec.seed;
  const TrajTask task = scene.task();
  auto batch = init_trajectories(task, ends, tc, tc.particles);
  const AlResult al = solve_al(batch, task, tc);
  rec.path_length = al.cost.path_length;
  rec.success = al.success;
  if (!scene.has_stage1()) rec.final_cost = al.validation.max_violation;
  rec.time_ms = elapsed_ms(t0);
  return rec;
}

TrialRun run_trials(const Scene& scene, const TrialOptions& options, std::size_t trials,
                    const std::function<void(const TrialRecord&)>& on_trial) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  TrialRun run;
  for (std::size_t i = 0; i < trials; ++i) {
    run.records.push_back(run_trial(scene, options, i));
    if (on_trial) on_trial(run.records.back());
  }
  run.summary = summarize(run.records);
  return run;
}

void write_trials_csv(std::ostream& os, std::span<const TrialRecord> records, bool with_time) {
  os << "trial,seed,success,restarts,steps,final_cost,path_length";
  if (with_time) os << ",time_ms";
  os << "\n";
  for (const TrialRecord& r : records) {
    os << r.trial << "," << r.seed << "," << (r.success ? 1 : 0) << "," << r.restarts << ","
       << r.steps << "," << (std::isfinite(r.final_cost) ? fmt("%.9g", r.final_cost) : std::string()) << ","
       << (r.path_length < 0.0 ? std::string() : fmt("%.9g", r.path_length));
    if (with_time) os << "," << fmt("%.3f", r.time_ms);
    os << "\n";
  }
}

// ---------------------------------------------------------------- sweep

SweepGrid run_sweep(const Scene& scene, const TrialOptions& options,
                    std::span<const std::size_t> ns, std::span<const std::size_t> ms,
                    std::size_t trials, const std::function<void(const SweepCell&)>& on_cell) {
  SweepGrid grid;
  grid.ns.assign(ns.begin(), ns.end());
  grid.ms.assign(ms.begin(), ms.end());
  for (std::size_t n : ns) {
    for (std::size_t m : ms) {
      SweepCell cell;
      cell.n = n;
      cell.m = m;
      if (m > n) {
        cell.skipped = true;
      } else {
        TrialOptions o = options;
        o.optimizer.sample_batch = n;
        o.optimizer.optimize_batch = m;
        cell.summary = run_trials(scene, o, trials).summary;
      }
      grid.cells.push_back(cell);
      if (on_cell) on_cell(cell);
    }
  }
  return grid;
}

void write_sweep_csv(std::ostream& os, const SweepGrid& grid) {
  os << "N,M,trials,success_rate,mean_ms,ci95_ms\n";
  for (const SweepCell& c : grid.cells) {
    os << c.n << "," << c.m << ",";
    if (c.skipped) {
      os << "0,skipped,,\n";
      continue;
    }
    os << c.summary.trials << "," << fmt("%.4f", c.summary.success_rate) << ","
       << fmt("%.3f", c.summary.mean_ms) << "," << fmt("%.3f", c.summary.ci95_ms) << "\n";
  }
}

SweepGrid read_sweep_csv(std::istream& is) {
  SweepGrid grid;
  std::string line;
  if (!std::getline(is, line) || line.rfind("N,M,trials", 0) != 0) {
    throw std::runtime_error("sweep csv: missing header");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    while (f.size() < 6) f.emplace_back();
    try {
      SweepCell c;
      c.n = std::stoul(f[0]);
      c.m = std::stoul(f[1]);
      c.skipped = f[3] == "skipped";
      if (!c.skipped) {
        c.summary.trials = std::stoul(f[2]);
        c.summary.success_rate = std::stod(f[3]);
        c.summary.mean_ms = std::stod(f[4]);
        c.summary.ci95_ms = std::stod(f[5]);
        c.summary.successes = static_cast<std::size_t>(
            std::lround(c.summary.success_rate * static_cast<double>(c.summary.trials)));
      }
      if (std::find(grid.ns.begin(), grid.ns.end(), c.n) == grid.ns.end()) grid.ns.push_back(c.n);
      if (std::find(grid.ms.begin(), grid.ms.end(), c.m) == grid.ms.end()) grid.ms.push_back(c.m);
      grid.cells.push_back(c);
    } catch (const std::logic_error&) {
      throw std::runtime_error("sweep csv: bad row at line " + std::to_string(lineno));
    }
  }
  return grid;
}

void write_sweep_svg(std::ostream& os, const SweepGrid& grid) {
  const double cw = 90.0, ch = 44.0, left = 80.0, top = 50.0;
  const double w = left + cw * static_cast<double>(grid.ms.size()) + 120.0;
  const double h = top + ch * static_cast<double>(grid.ns.size()) + 60.0;
  double lo = INFINITY, hi = -INFINITY;
  for (const SweepCell& c : grid.cells) {
    if (c.skipped || c.summary.mean_ms <= 0.0) continue;
    lo = std::min(lo, std::log10(c.summary.mean_ms));
    hi = std::max(hi, std::log10(c.summary.mean_ms));
  }
  if (!(hi > lo)) hi = lo + 1.0;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">mean time to first solution (ms)</text>\n";
  for (std::size_t j = 0; j < grid.ms.size(); ++j) {
    os << "<text x=\"" << left + cw * (j + 0.5) << "\" y=\"" << top - 8
       << "\" text-anchor=\"middle\">M=" << grid.ms[j] << "</text>\n";
  }
  for (std::size_t i = 0; i < grid.ns.size(); ++i) {
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + ch * (i + 0.5) + 4
       << "\" text-anchor=\"end\">N=" << grid.ns[i] << "</text>\n";
  }
  for (const SweepCell& c : grid.cells) {
    const auto i = static_cast<std::size_t>(
        std::find(grid.ns.begin(), grid.ns.end(), c.n) - grid.ns.begin());
    const auto j = static_cast<std::size_t>(
        std::find(grid.ms.begin(), grid.ms.end(), c.m) - grid.ms.begin());
    const double x = left + cw * j, y = top + ch * i;
    std::string fill = "#dddddd";
    std::string label = "skipped";
    if (!c.skipped) {
      const double u = c.summary.mean_ms > 0.0 ? (std::log10(c.summary.mean_ms) - lo) / (hi - lo) : 0.0;
      const int r = static_cast<int>(255 * u), b = static_cast<int>(255 * (1.0 - u));
      fill = "rgb(" + std::to_string(r) + ",80," + std::to_string(b) + ")";
      label = fmt("%.1f", c.summary.mean_ms) + " / " + fmt("%.0f%%", 100.0 * c.summary.success_rate);
    }
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
       << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
    os << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
       << "\" text-anchor=\"middle\" fill=\"" << (c.skipped ? "black" : "white") << "\">"
       << label << "</text>\n";
  }
  os << "<text x=\"" << left << "\" y=\"" << h - 20
     << "\">cell: mean ms / success rate; colour: log time (blue fast, red slow)</text>\n";
  os << "</svg>\n";
}

// ---------------------------------------------------------------- trace

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
  os << "step,particle_id,cost,selected,satisfied\n";
  for (const TraceRow& r : trace) {
    os << r.step << "," << r.particle_id << "," << fmt("%.9g", r.cost) << ","
       << (r.selected ? 1 : 0) << "," << (r.satisfied ? 1 : 0) << "\n";
  }
}

void write_trace_svg(std::ostream& os, std::span<const TraceRow> trace) {
  const double w = 720.0, h = 420.0, left = 70.0, right = 20.0, top = 30.0, bottom = 50.0;
  const double floor_cost = 1e-8;
  int max_step = 1;
  double hi = 1.0;
  std::map<std::size_t, std::vector<const TraceRow*>> by_particle;
  for (const TraceRow& r : trace) {
    max_step = std::max(max_step, r.step);
    hi = std::max(hi, r.cost);
    by_particle[r.particle_id].push_back(&r);
  }
  const double lhi = std::ceil(std::log10(hi));
  const double llo = std::log10(floor_cost);
  const auto X = [&](int step) { return left + (w - left - right) * step / max_step; };
  const auto Y = [&](double c) {
    const double l = std::log10(std::max(c, floor_cost));
    return top + (h - top - bottom) * (lhi - l) / (lhi - llo);
  };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int e = static_cast<int>(llo); e <= static_cast<int>(lhi); e += 2) {
    const double y = Y(std::pow(10.0, e));
    os << "<line x1=\"" << left << "\" x2=\"" << w - right << "\" y1=\"" << y << "\" y2=\"" << y
       << "\" stroke=\"#eeeeee\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e
       << "</text>\n";
  }
  for (int s = 0; s <= max_step; s += std::max(1, max_step / 6)) {
    os << "<text x=\"" << X(s) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << s
       << "</text>\n";
  }
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12
     << "\" text-anchor=\"middle\">optimization step</text>\n";
  os << "<text x=\"14\" y=\"" << (top + h - bottom) / 2 << "\" transform=\"rotate(-90 14 "
     << (top + h - bottom) / 2 << ")\" text-anchor=\"middle\">cost (log)</text>\n";
  // Rejected first so selected curves draw on top.
  for (int pass = 0; pass < 2; ++pass) {
    const bool want_selected = pass == 1;
    for (const auto& [id, rows] : by_particle) {
      if (rows.empty() || rows.front()->selected != want_selected) continue;
      os << "<polyline fill=\"none\" stroke=\"" << (want_selected ? "#1f77b4" : "#bbbbbb")
         << "\" stroke-opacity=\"" << (want_selected ? "0.5" : "0.35") << "\" points=\"";
      for (const TraceRow* r : rows) os << X(r->step) << "," << Y(r->cost) << " ";
      os << "\"/>\n";
    }
  }
  os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 12
     << "\" fill=\"#1f77b4\">selected</text>\n";
  os << "<text x=\"" << w - right - 80 << "\" y=\"" << top + 12
     << "\" fill=\"#888888\">rejected</text>\n";
  os << "</svg>\n";
}

// ---------------------------------------------------------------- selection

double SelectionStats::selected_rate() const {
  return selected_total ? static_cast<double>(selected_satisfied) / selected_total : 0.0;
}

double SelectionStats::rejected_rate() const {
  return rejected_total ? static_cast<double>(rejected_satisfied) / rejected_total : 0.0;
}

SelectionStats selection_efficacy(const CostModel& model, const OptimizerConfig& config,
                                  std::size_t trials) {
  config.validate();
  if (config.optimize_batch * 2 > config.sample_batch) {
    throw std::invalid_argument("selection_efficacy needs N >= 2M");
  }
  SelectionStats stats;
  stats.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    ParticleBatch all = sample_uniform(model, config.sample_batch, config.seed + t, 0);
    model.evaluate(all, CostMode::linear, all.costs);
    const auto order = select_topk(all.costs, config.sample_batch);
    const std::vector<std::size_t> top(order.begin(), order.begin() + config.optimize_batch);
    std::vector<std::size_t> rest(order.begin() + config.optimize_batch, order.end());
    std::sort(rest.begin(), rest.end());
    std::mt19937_64 rng(stream_seed(config.seed + t, 0x5e1ec7, 0));
    std::shuffle(rest.begin(), rest.end(), rng);
    rest.resize(config.optimize_batch);
    std::sort(rest.begin(), rest.end());

    ParticleBatch sel = all.gather(top);
    ParticleBatch rej = all.gather(rest);
    optimize_batch(sel, model, config);
    optimize_batch(rej, model, config);
    stats.selected_total += sel.rows();
    stats.rejected_total += rej.rows();
    for (auto s : sel.satisfied) stats.selected_satisfied += s;
    for (auto s : rej.satisfied) stats.rejected_satisfied += s;
  }
  return stats;
}

}  // namespace spasm
