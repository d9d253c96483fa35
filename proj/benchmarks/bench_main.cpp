#include <benchmark/benchmark.h>

#include "clearn/analytic.hpp"
#include "clearn/envs.hpp"
#include "clearn/learners.hpp"
#include "clearn/replay.hpp"
#include "clearn/tabular.hpp"

namespace {

using namespace clearn;

const NoisyGridworld& world() {
  static NoisyGridworld w(5, 5);
  return w;
}

StochasticPolicy bench_policy() {
  RngStream rng(1);
  return dirichlet_policy(world().mdp(), 1.0, rng);
}

void BM_AnalyticDensity(benchmark::State& state) {
  const StochasticPolicy pi = bench_policy();
  for (auto _ : state)
    benchmark::DoNotOptimize(analytic_density(world().mdp(), pi, 0.9));
}
BENCHMARK(BM_AnalyticDensity);

void BM_AssignmentSweep(benchmark::State& state) {
  const StochasticPolicy pi = bench_policy();
  const std::vector<double> marginal(25, 1.0 / 25.0);
  RatioTable r;
  r.ratio = Tensor3(25, 4, 25, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(assignment_sweep(world().mdp(), pi, marginal, r, 0.9));
}
BENCHMARK(BM_AssignmentSweep);

void BM_GeometricDelta(benchmark::State& state) {
  RngStream rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(rng.geometric_delta(0.9));
}
BENCHMARK(BM_GeometricDelta);

void BM_McStep(benchmark::State& state) {
  const StochasticPolicy pi = bench_policy();
  RngStream data_rng(3);
  const ReplayBuffer buf = collect_buffer(world().mdp(), pi, 100, 100, data_rng);
  RngStream rng(5);
  NetModel model = NetModel::create(
      StateEmbedding{world().all_centers(), NoisyGridworld::kNumActions}, 32, 3e-3, rng);
  LearnerConfig lc;
  lc.gamma = 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(mc_c_step(model, buf, lc, rng));
}
BENCHMARK(BM_McStep);

void BM_TdStep(benchmark::State& state) {
  const StochasticPolicy pi = bench_policy();
  RngStream data_rng(3);
  const ReplayBuffer buf = collect_buffer(world().mdp(), pi, 100, 100, data_rng);
  RngStream rng(5);
  NetModel model = NetModel::create(
      StateEmbedding{world().all_centers(), NoisyGridworld::kNumActions}, 32, 3e-3, rng);
  LearnerConfig lc;
  lc.gamma = 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(td_c_step(model, buf, pi, lc, rng));
}
BENCHMARK(BM_TdStep);

}  // namespace

BENCHMARK_MAIN();
