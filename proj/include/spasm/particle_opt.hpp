#pragma once

#include "spasm/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace spasm {

struct Bounds {
  double lower{0.0};
  double upper{0.0};

  double clamp(double v) const { return v < lower ? lower : (v > upper ? upper : v); }
  bool contains(double v) const { return v >= lower && v <= upper; }
};

// P x D particle states (row-major) with per-particle cost and status.
class ParticleBatch {
 public:
  ParticleBatch() = default;
  ParticleBatch(std::size_t rows, std::size_t dim);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<double> costs;
  std::vector<std::uint8_t> satisfied;
  // Particles whose last gradient held a non-finite component.
  std::vector<std::uint8_t> flagged;

  // New batch holding the listed rows in order.
  ParticleBatch gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_{0};
  std::size_t dim_{0};
  std::vector<double> values_;
};

// Problem contract for the particle engine. Implementations must be safe to
// call concurrently on distinct rows.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual const std::vector<Bounds>& bounds() const = 0;
  virtual double cost(std::span<const double> x, CostMode mode) const = 0;
  // Writes d(cost)/dx into grad (size D) and returns the cost.
  virtual double cost_gradient(std::span<const double> x, CostMode mode,
                               std::span<double> grad) const = 0;
  // Sampling lattice for a dimension (0 = continuous). Quantized dims are
  // snapped after uniform sampling; the optimizer still moves them freely.
  virtual double sampling_quantum(std::size_t /*dim*/) const { return 0.0; }

  // Batch kernels (OpenMP across rows).
  void evaluate(const ParticleBatch& batch, CostMode mode,
                std::span<double> costs) const;
  void gradient(const ParticleBatch& batch, CostMode mode,
                std::span<double> grads, std::span<double> costs) const;
  // Quadratic-mode cost below epsilon, recomputed from scratch.
  std::vector<std::uint8_t> satisfaction(const ParticleBatch& batch,
                                         double epsilon) const;

  // Serial reference versions of the batch kernels.
  void evaluate_serial(const ParticleBatch& batch, CostMode mode,
                       std::span<double> costs) const;
  void gradient_serial(const ParticleBatch& batch, CostMode mode,
                       std::span<double> grads, std::span<double> costs) const;
};

struct OptimizerConfig {
  std::size_t sample_batch{4096};    // N
  std::size_t optimize_batch{512};   // M
  int linear_steps{25};              // K_lin
  int quadratic_steps{5};            // K_quad
  double eta_init{0.1};
  double alpha{0.05};
  double epsilon{1e-3};
  std::size_t solutions{32};         // P returned
  int max_restarts{64};
  std::uint64_t seed{0};
  // Cumulative optimizer-step cap across restarts (0 = unlimited).
  std::int64_t step_cap{30000};
  bool trace{false};
  std::size_t trace_cap{4096};

  // Throws std::invalid_argument naming the violated bound.
  void validate() const;
  int total_steps() const { return linear_steps + quadratic_steps; }
};

struct TraceRow {
  int step{0};
  std::size_t particle_id{0};
  double cost{0.0};
  bool selected{false};
  bool satisfied{false};
};

struct SolveReport {
  int restarts_used{0};   // restarts beyond the first pass
  int passes{0};          // optimization passes run (restarts_used + 1 on success)
  std::int64_t steps_used{0};
  double wall_ms{0.0};
  std::size_t flagged_particles{0};
  std::vector<TraceRow> trace;  // first pass only
};

struct SolveResult {
  bool success{false};
  ParticleBatch solutions;   // ascending final cost, at most P rows
  SolveReport report;
};

// Row i drawn from its own stream seeded by (seed, restart, i).
ParticleBatch sample_uniform(const CostModel& model, std::size_t n,
                             std::uint64_t seed, std::uint64_t restart);

// Indices of the m lowest costs, ascending, ties by index.
std::vector<std::size_t> select_topk(std::span<const double> costs, std::size_t m);

// eta_init * (1 - k / k_lin), for 1 <= k <= k_lin.
double lr_schedule(int k, int k_lin, double eta_init);

// x <- clamp(x - rate * grad(x), bounds), then costs re-evaluated in `mode`.
void descend(ParticleBatch& batch, const CostModel& model, CostMode mode,
             double rate);
void descend_serial(ParticleBatch& batch, const CostModel& model,
                    CostMode mode, double rate);

// Overwrites the first rows with (clamped) seeds. Extra seeds beyond the
// batch size are ignored.
void inject_warm_start(ParticleBatch& batch, const CostModel& model,
                       std::span<const std::vector<double>> seeds);

// Runs the linear then quadratic phases on `batch` in place, then marks
// satisfaction from a fresh quadratic evaluation. `on_step` (optional)
// sees the batch after every step.
template <class OnStep>
void optimize_batch(ParticleBatch& batch, const CostModel& model,
                    const OptimizerConfig& config, OnStep&& on_step);
void optimize_batch(ParticleBatch& batch, const CostModel& model,
                    const OptimizerConfig& config);

// Full sample / select / optimize / restart loop.
SolveResult solve(const CostModel& model, const OptimizerConfig& config,
                  std::span<const std::vector<double>> warm_start = {});

// --- template implementation ---

template <class OnStep>
void optimize_batch(ParticleBatch& batch, const CostModel& model,
                    const OptimizerConfig& config, OnStep&& on_step) {
  int step = 0;
  for (int k = 1; k <= config.linear_steps; ++k) {
    descend(batch, model, CostMode::linear,
            lr_schedule(k, config.linear_steps, config.eta_init));
    on_step(++step, batch);
  }
  for (int k = 1; k <= config.quadratic_steps; ++k) {
    descend(batch, model, CostMode::quadratic, config.alpha);
    on_step(++step, batch);
  }
  batch.satisfied = model.satisfaction(batch, config.epsilon);
}

}  // namespace spasm
