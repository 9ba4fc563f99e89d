#include <benchmark/benchmark.h>

#include <cmath>

#include "stokit/brownian.hpp"
#include "stokit/exit_problems.hpp"
#include "stokit/integrators.hpp"
#include "stokit/random.hpp"

using namespace stokit;

static void BM_StandardNormal(benchmark::State& state) {
  std::uint64_t i = 0;
  double acc = 0.0;
  for (auto _ : state) acc += standard_normal(42, stream::positive_time, i++, 0);
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(static_cast<std::int64_t>(i));
}
BENCHMARK(BM_StandardNormal);

static void BM_SamplePath(benchmark::State& state) {
  const double dt = 1.0 / static_cast<double>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_path(seed++, 1, 0.0, 1.0, dt));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SamplePath)->Arg(1 << 10)->Arg(1 << 14);

static void BM_EulerMaruyamaEnsemble(benchmark::State& state) {
  const auto model = models::langevin(1.0, std::sqrt(2.0));
  EnsembleConfig c;
  c.n_paths = static_cast<std::size_t>(state.range(0));
  c.dt = 1e-3;
  c.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_ensemble(model, Vector::Ones(1), Scheme::euler_maruyama, c));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0) * 1000);
}
BENCHMARK(BM_EulerMaruyamaEnsemble)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_MilsteinPath(benchmark::State& state) {
  const auto model = models::population(2.0, 1.0);
  const auto path = sample_path(7, 1, 0.0, 1.0, 1e-4);
  for (auto _ : state) benchmark::DoNotOptimize(milstein(model, Vector::Ones(1), path, 0.0, 1.0));
}
BENCHMARK(BM_MilsteinPath)->Unit(benchmark::kMicrosecond);

static void BM_EscapeProbability2D(benchmark::State& state) {
  const double h = 1.0 / static_cast<double>(state.range(0));
  const auto d = Domain::rectangle({0.0, 0.0}, {1.0, 1.0}, {h, h}, {Face::left});
  const auto model = models::brownian(2, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(escape_probability(model, d));
}
BENCHMARK(BM_EscapeProbability2D)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
