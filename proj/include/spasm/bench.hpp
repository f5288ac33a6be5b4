#pragma once

#include "spasm/particle_opt.hpp"
#include "spasm/scene.hpp"
#include "spasm/trajopt.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace spasm {

struct TrialOptions {
  OptimizerConfig optimizer;
  TrajOptConfig trajopt;
  bool run_trajopt{false};
  std::vector<std::vector<double>> warm_start;
};

struct TrialRecord {
  std::size_t trial{0};
  std::uint64_t seed{0};
  bool success{false};
  double time_ms{0.0};  // stage 1 incl. restarts, plus stage 2 when run
  int restarts{0};
  std::int64_t steps{0};
  double final_cost{0.0};   // independently recomputed placement cost (NaN if none)
  double path_length{-1.0}; // -1 when stage 2 did not run
};

struct TrialSummary {
  std::size_t trials{0};
  std::size_t successes{0};
  double success_rate{0.0};
  double mean_ms{0.0};
  double ci95_ms{0.0};  // half-width, normal approximation
  double median_ms{0.0};
};

struct TrialRun {
  std::vector<TrialRecord> records;
  TrialSummary summary;
};

// Half-width of the normal-approximation 95% interval of the mean.
double ci95_half_width(std::span<const double> xs);
TrialSummary summarize(std::span<const TrialRecord> records);

// Trial i uses seed optimizer.seed + i. Success requires the independent
// checkers (and trajectory validation when stage 2 runs) to pass.
TrialRecord run_trial(const Scene& scene, const TrialOptions& options, std::size_t index);
TrialRun run_trials(const Scene& scene, const TrialOptions& options, std::size_t trials,
                    const std::function<void(const TrialRecord&)>& on_trial = {});

// CSV columns: trial, seed, success, restarts, steps, final_cost,
// path_length (empty when not available), and time_ms only when `with_time` (wall time breaks
// byte-for-byte reproducibility).
void write_trials_csv(std::ostream& os, std::span<const TrialRecord> records, bool with_time);

struct SweepCell {
  std::size_t n{0};
  std::size_t m{0};
  bool skipped{false};  // m > n
  TrialSummary summary;
};

struct SweepGrid {
  std::vector<std::size_t> ns;
  std::vector<std::size_t> ms;
  std::vector<SweepCell> cells;  // row-major over (n, m)
};

SweepGrid run_sweep(const Scene& scene, const TrialOptions& options,
                    std::span<const std::size_t> ns, std::span<const std::size_t> ms,
                    std::size_t trials,
                    const std::function<void(const SweepCell&)>& on_cell = {});

// Columns N, M, trials, success_rate, mean_ms, ci95_ms; skipped cells
// carry "skipped" in the success_rate column.
void write_sweep_csv(std::ostream& os, const SweepGrid& grid);
SweepGrid read_sweep_csv(std::istream& is);
// Heat map of mean time per cell, success rate printed in each cell.
void write_sweep_svg(std::ostream& os, const SweepGrid& grid);

// Columns step, particle_id, cost, selected, satisfied.
void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);
// Per-particle cost curves on a log axis; rejected particles drawn grey.
void write_trace_svg(std::ostream& os, std::span<const TraceRow> trace);

struct SelectionStats {
  std::size_t trials{0};
  std::size_t selected_total{0};
  std::size_t selected_satisfied{0};
  std::size_t rejected_total{0};
  std::size_t rejected_satisfied{0};
  double selected_rate() const;
  double rejected_rate() const;
};

// Per trial: sample N, keep the top M, and also draw M particles uniformly
// from the rejected remainder; optimize both and count satisfied rows.
SelectionStats selection_efficacy(const CostModel& model, const OptimizerConfig& config,
                                  std::size_t trials);

}  // namespace spasm
