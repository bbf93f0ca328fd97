#include <benchmark/benchmark.h>

#include "rsreg/replica.hpp"

namespace {

using namespace rsreg;

ModelParams quad_params() {
  return ModelParams::regression(2.0, 1.0, 0.5, 1.0, Potential::quadratic(1.0));
}

void BM_HermiteRule(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hermite_rule(n));
}
BENCHMARK(BM_HermiteRule)->Arg(20)->Arg(80)->Arg(256);

void BM_MapPhi(benchmark::State& state) {
  const ModelParams p = quad_params();
  const QuadratureGrid grid = make_grid(static_cast<int>(state.range(0)),
                                        static_cast<int>(state.range(0)));
  double r, rbar;
  for (auto _ : state) {
    map_phi(p, 0.4, 0.9, grid, r, rbar);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_MapPhi)->Arg(20)->Arg(80);

void BM_SolveFixedPoint(benchmark::State& state) {
  const ModelParams p = quad_params();
  const QuadratureGrid grid = make_grid(80, 80);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fixed_point(p, grid));
}
BENCHMARK(BM_SolveFixedPoint);

void BM_FreeEnergy(benchmark::State& state) {
  const ModelParams p = quad_params();
  const QuadratureGrid grid = make_grid(80, 80);
  const OverlapState s = closed_form_quadratic(p);
  for (auto _ : state)
    benchmark::DoNotOptimize(free_energy_F(p, s.q, s.rho, grid));
}
BENCHMARK(BM_FreeEnergy);

}  // namespace
