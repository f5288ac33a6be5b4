// Serial reference vs OpenMP batch kernels on a 5-block tetris model.

#include "spasm/parallel.hpp"
#include "spasm/particle_opt.hpp"
#include "spasm/problems.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

using namespace spasm;

namespace {

const TetrisProblem& tetris5() {
  static const TetrisProblem problem = [] {
    const double h = std::numbers::pi / 2;
    std::vector<BlockShape> blocks{
        {"L", {{0, 0}, {1, 0}, {2, 0}, {2, 1}}, 1.0},
        {"J", {{0, 0}, {1, 0}, {2, 0}, {0, 1}}, 1.0},
        {"S", {{0, 0}, {1, 0}, {1, 1}, {2, 1}}, 1.0},
        {"T", {{0, 0}, {1, 0}, {2, 0}, {1, 1}}, 1.0},
        {"P", {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0, 2}}, 1.0},
    };
    return TetrisProblem(std::move(blocks), Aabb{{0, 0, 0}, {7, 3, 1}}, 0.0, YawMode::fixed, {},
                         {3 * h, 2 * h, 0, 0, 3 * h});
  }();
  return problem;
}

ParticleBatch batch(const CostModel& model, std::size_t rows) {
  return sample_uniform(model, rows, 1, 0);
}

void BM_Evaluate(benchmark::State& state, bool parallel) {
  const PlacementCostModel model(tetris5());
  const ParticleBatch b = batch(model, static_cast<std::size_t>(state.range(0)));
  std::vector<double> costs(b.rows());
  for (auto _ : state) {
    if (parallel) {
      model.evaluate(b, CostMode::linear, costs);
    } else {
      model.evaluate_serial(b, CostMode::linear, costs);
    }
    benchmark::DoNotOptimize(costs.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Gradient(benchmark::State& state, bool parallel) {
  const PlacementCostModel model(tetris5());
  const ParticleBatch b = batch(model, static_cast<std::size_t>(state.range(0)));
  std::vector<double> grads(b.rows() * b.dim()), costs(b.rows());
  for (auto _ : state) {
    if (parallel) {
      model.gradient(b, CostMode::quadratic, grads, costs);
    } else {
      model.gradient_serial(b, CostMode::quadratic, grads, costs);
    }
    benchmark::DoNotOptimize(grads.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Solve(benchmark::State& state) {
  const PlacementCostModel model(tetris5());
  OptimizerConfig c;
  c.eta_init = 0.2;
  c.alpha = 0.01;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    c.seed = seed++;
    benchmark::DoNotOptimize(solve(model, c).success);
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_Evaluate, serial, false)->RangeMultiplier(4)->Range(512, 8192);
BENCHMARK_CAPTURE(BM_Evaluate, parallel, true)->RangeMultiplier(4)->Range(512, 8192);
BENCHMARK_CAPTURE(BM_Gradient, serial, false)->RangeMultiplier(4)->Range(512, 8192);
BENCHMARK_CAPTURE(BM_Gradient, parallel, true)->RangeMultiplier(4)->Range(512, 8192);
BENCHMARK(BM_Solve)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
