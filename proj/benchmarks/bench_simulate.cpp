#include <benchmark/benchmark.h>

#include "rsreg/simulate.hpp"

namespace {

using namespace rsreg;

ModelParams quad_params() {
  return ModelParams::regression(2.0, 1.0, 0.5, 1.0, Potential::quadratic(1.0));
}

void BM_GenerateInstance(benchmark::State& state) {
  const ModelParams p = quad_params();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_instance(p, n, 1, XStarMode::Gaussian));
}
BENCHMARK(BM_GenerateInstance)->Arg(100)->Arg(500);

void BM_ExactPosterior(benchmark::State& state) {
  const ModelParams p = quad_params();
  const int n = static_cast<int>(state.range(0));
  const auto inst = generate_instance(p, n, 1, XStarMode::Gaussian);
  for (auto _ : state)
    benchmark::DoNotOptimize(exact_posterior(inst, p.potential, p.kappa));
}
BENCHMARK(BM_ExactPosterior)->Arg(100)->Arg(500);

void BM_MalaStep(benchmark::State& state) {
  const ModelParams p = quad_params();
  const auto inst = generate_instance(p, 50, 1, XStarMode::Gaussian);
  SamplerConfig cfg;
  cfg.burn_in = 100;
  cfg.samples = 1000;
  for (auto _ : state)
    benchmark::DoNotOptimize(mala_sample(inst, p.potential, p.kappa, cfg, 1, 1));
}
BENCHMARK(BM_MalaStep);

}  // namespace

BENCHMARK_MAIN();
