#include "spasm/particle_opt.hpp"

#include "spasm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace spasm {

ParticleBatch::ParticleBatch(std::size_t rows, std::size_t dim)
    : costs(rows, 0.0),
      satisfied(rows, 0),
      flagged(rows, 0),
      rows_(rows),
      dim_(dim),
      values_(rows * dim, 0.0) {}

ParticleBatch ParticleBatch::gather(std::span<const std::size_t> indices) const {
  ParticleBatch out(indices.size(), dim_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
    out.costs[r] = costs[indices[r]];
    out.satisfied[r] = satisfied[indices[r]];
    out.flagged[r] = flagged[indices[r]];
  }
  return out;
}

void CostModel::evaluate(const ParticleBatch& batch, CostMode mode,
                         std::span<double> costs) const {
  parallel_for(batch.rows(),
               [&](std::size_t i) { costs[i] = cost(batch.row(i), mode); });
}

void CostModel::evaluate_serial(const ParticleBatch& batch, CostMode mode,
                                std::span<double> costs) const {
  serial_for(batch.rows(),
             [&](std::size_t i) { costs[i] = cost(batch.row(i), mode); });
}

void CostModel::gradient(const ParticleBatch& batch, CostMode mode,
                         std::span<double> grads, std::span<double> costs) const {
  const std::size_t d = batch.dim();
  parallel_for(batch.rows(), [&](std::size_t i) {
    costs[i] = cost_gradient(batch.row(i), mode, grads.subspan(i * d, d));
  });
}

void CostModel::gradient_serial(const ParticleBatch& batch, CostMode mode,
                                std::span<double> grads,
                                std::span<double> costs) const {
  const std::size_t d = batch.dim();
  serial_for(batch.rows(), [&](std::size_t i) {
    costs[i] = cost_gradient(batch.row(i), mode, grads.subspan(i * d, d));
  });
}

std::vector<std::uint8_t> CostModel::satisfaction(const ParticleBatch& batch,
                                                  double epsilon) const {
  std::vector<double> costs(batch.rows());
  evaluate(batch, CostMode::quadratic, costs);
  std::vector<std::uint8_t> mask(batch.rows());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    mask[i] = std::isfinite(costs[i]) && costs[i] < epsilon;
  }
  return mask;
}

void OptimizerConfig::validate() const {
  if (optimize_batch < 1) throw std::invalid_argument("M must be >= 1");
  if (optimize_batch > sample_batch) {
    throw std::invalid_argument("M must not exceed N");
  }
  if (linear_steps < 0) throw std::invalid_argument("K_lin must be >= 0");
  if (quadratic_steps < 0) throw std::invalid_argument("K_quad must be >= 0");
  if (!(eta_init > 0.0)) throw std::invalid_argument("eta_init must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (solutions < 1) throw std::invalid_argument("P_return must be >= 1");
  if (max_restarts < 1) throw std::invalid_argument("max_restarts must be >= 1");
}

ParticleBatch sample_uniform(const CostModel& model, std::size_t n,
                             std::uint64_t seed, std::uint64_t restart) {
  const std::size_t d = model.dimension();
  const auto& bounds = model.bounds();
  ParticleBatch batch(n, d);
  parallel_for(n, [&](std::size_t i) {
    std::mt19937_64 rng(stream_seed(seed, restart, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto x = batch.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const Bounds& b = bounds[k];
      const double u = unit(rng);
      if (b.upper <= b.lower) {
        x[k] = b.lower;
        continue;
      }
      double v = b.lower + u * (b.upper - b.lower);
      if (const double q = model.sampling_quantum(k); q > 0.0) {
        v = b.clamp(std::round(v / q) * q);
      }
      x[k] = v;
    }
  });
  return batch;
}

std::vector<std::size_t> select_topk(std::span<const double> costs,
                                     std::size_t m) {
  std::vector<std::size_t> idx(costs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  m = std::min(m, idx.size());
  const auto less = [&](std::size_t a, std::size_t b) {
    // NaN costs sort last.
    const double ca = std::isnan(costs[a]) ? INFINITY : costs[a];
    const double cb = std::isnan(costs[b]) ? INFINITY : costs[b];
    return ca < cb || (ca == cb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m),
                    idx.end(), less);
  idx.resize(m);
  return idx;
}

double lr_schedule(int k, int k_lin, double eta_init) {
  return eta_init * (1.0 - static_cast<double>(k) / static_cast<double>(k_lin));
}

namespace {

template <class Loop>
void descend_impl(ParticleBatch& batch, const CostModel& model, CostMode mode,
                  double rate, Loop&& loop) {
  const std::size_t d = batch.dim();
  const auto& bounds = model.bounds();
  loop(batch.rows(), [&](std::size_t i) {
    auto x = batch.row(i);
    std::vector<double> grad(d, 0.0);
    model.cost_gradient(x, mode, grad);
    const bool finite = std::all_of(grad.begin(), grad.end(),
                                    [](double g) { return std::isfinite(g); });
    batch.flagged[i] = !finite;
    if (finite) {
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = bounds[k].clamp(x[k] - rate * grad[k]);
      }
    }
    batch.costs[i] = model.cost(x, mode);
  });
}

}  // namespace

void descend(ParticleBatch& batch, const CostModel& model, CostMode mode,
             double rate) {
  descend_impl(batch, model, mode, rate,
               [](std::size_t n, auto&& f) { parallel_for(n, f); });
}

void descend_serial(ParticleBatch& batch, const CostModel& model,
                    CostMode mode, double rate) {
  descend_impl(batch, model, mode, rate,
               [](std::size_t n, auto&& f) { serial_for(n, f); });
}

void inject_warm_start(ParticleBatch& batch, const CostModel& model,
                       std::span<const std::vector<double>> seeds) {
  const auto& bounds = model.bounds();
  const std::size_t count = std::min(seeds.size(), batch.rows());
  for (std::size_t r = 0; r < count; ++r) {
    if (seeds[r].size() != batch.dim()) {
      throw std::invalid_argument("warm-start seed has dimension " +
                                  std::to_string(seeds[r].size()) +
                                  ", expected " + std::to_string(batch.dim()));
    }
    auto x = batch.row(r);
    for (std::size_t k = 0; k < batch.dim(); ++k) x[k] = bounds[k].clamp(seeds[r][k]);
  }
}

void optimize_batch(ParticleBatch& batch, const CostModel& model,
                    const OptimizerConfig& config) {
  optimize_batch(batch, model, config, [](int, const ParticleBatch&) {});
}

namespace {

// Trace of the first pass: the first min(M, cap) sampled particles are
// followed whether or not selection kept them; rejected ones are optimized
// in a shadow batch that never feeds the result.
struct PassTracer {
  std::vector<std::size_t> traced;          // sample indices
  std::vector<std::uint8_t> traced_selected;
  std::vector<std::size_t> slot;            // position in opt or shadow batch
  ParticleBatch shadow;

  void record(int step, const ParticleBatch& opt, const CostModel& model,
              double epsilon, std::vector<TraceRow>& out) {
    const auto sat_opt = model.satisfaction(opt, epsilon);
    const auto sat_shadow = model.satisfaction(shadow, epsilon);
    for (std::size_t t = 0; t < traced.size(); ++t) {
      const bool sel = traced_selected[t] != 0;
      const ParticleBatch& src = sel ? opt : shadow;
      const auto& sat = sel ? sat_opt : sat_shadow;
      out.push_back({step, traced[t], src.costs[slot[t]], sel, sat[slot[t]] != 0});
    }
  }
};

}  // namespace

SolveResult solve(const CostModel& model, const OptimizerConfig& config,
                  std::span<const std::vector<double>> warm_start) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  SolveReport& report = result.report;
  const int pass_steps = config.total_steps();

  for (int restart = 0; restart < config.max_restarts; ++restart) {
    if (config.step_cap > 0 && report.steps_used + pass_steps > config.step_cap &&
        restart > 0) {
      break;
    }
    ParticleBatch batch =
        sample_uniform(model, config.sample_batch, config.seed,
                       static_cast<std::uint64_t>(restart));
    inject_warm_start(batch, model, warm_start);
    model.evaluate(batch, CostMode::linear, batch.costs);
    const auto chosen = select_topk(batch.costs, config.optimize_batch);
    ParticleBatch opt = batch.gather(chosen);

    const bool tracing = config.trace && restart == 0;
    if (tracing) {
      PassTracer tracer;
      const std::size_t n_traced =
          std::min({config.optimize_batch, config.trace_cap, batch.rows()});
      std::vector<std::size_t> where(batch.rows(), SIZE_MAX);
      for (std::size_t r = 0; r < chosen.size(); ++r) where[chosen[r]] = r;
      std::vector<std::size_t> rejected;
      for (std::size_t i = 0; i < n_traced; ++i) {
        tracer.traced.push_back(i);
        if (where[i] != SIZE_MAX) {
          tracer.traced_selected.push_back(1);
          tracer.slot.push_back(where[i]);
        } else {
          tracer.traced_selected.push_back(0);
          tracer.slot.push_back(rejected.size());
          rejected.push_back(i);
        }
      }
      tracer.shadow = batch.gather(rejected);
      int step = 0;
      for (int k = 1; k <= config.linear_steps; ++k) {
        const double eta = lr_schedule(k, config.linear_steps, config.eta_init);
        descend(opt, model, CostMode::linear, eta);
        descend(tracer.shadow, model, CostMode::linear, eta);
        tracer.record(++step, opt, model, config.epsilon, report.trace);
      }
      for (int k = 1; k <= config.quadratic_steps; ++k) {
        descend(opt, model, CostMode::quadratic, config.alpha);
        descend(tracer.shadow, model, CostMode::quadratic, config.alpha);
        tracer.record(++step, opt, model, config.epsilon, report.trace);
      }
    } else {
      for (int k = 1; k <= config.linear_steps; ++k) {
        descend(opt, model, CostMode::linear,
                lr_schedule(k, config.linear_steps, config.eta_init));
      }
      for (int k = 1; k <= config.quadratic_steps; ++k) {
        descend(opt, model, CostMode::quadratic, config.alpha);
      }
    }
    report.steps_used += pass_steps;
    report.passes = restart + 1;
    for (auto f : opt.flagged) report.flagged_particles += f;

    // Fresh re-evaluation: the satisfaction test never reuses cached costs.
    std::vector<double> final_costs(opt.rows());
    model.evaluate(opt, CostMode::quadratic, final_costs);
    std::vector<std::size_t> good;
    for (std::size_t r = 0; r < opt.rows(); ++r) {
      if (std::isfinite(final_costs[r]) && final_costs[r] < config.epsilon) {
        good.push_back(r);
      }
    }
    if (!good.empty()) {
      std::vector<double> good_costs;
      for (auto r : good) good_costs.push_back(final_costs[r]);
      const auto order = select_topk(good_costs, config.solutions);
      std::vector<std::size_t> picked;
      for (auto o : order) picked.push_back(good[o]);
      result.solutions = opt.gather(picked);
      for (std::size_t r = 0; r < picked.size(); ++r) {
        result.solutions.costs[r] = final_costs[picked[r]];
        result.solutions.satisfied[r] = 1;
      }
      result.success = true;
      report.restarts_used = restart;
      break;
    }
    report.restarts_used = restart;
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

}  // namespace spasm
