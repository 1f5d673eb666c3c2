#include <benchmark/benchmark.h>

#include "mckv/coefficients.hpp"
#include "mckv/fokker_planck.hpp"

namespace {

// Ten steps of the tanh-mean limit equation; reported per step.
void BM_FpSteps(benchmark::State& state) {
  const double dx = 16.0 / static_cast<double>(state.range(0));
  const auto l = mckv::GridDensity::gaussian_1d(mckv::GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
  const auto cs = mckv::scenario("tanh-mean");
  constexpr int kSteps = 10;
  for (auto _ : state) benchmark::DoNotOptimize(mckv::solve_nonlinear_fp(cs, l, kSteps * 1e-4, 1e-4));
  state.SetItemsProcessed(state.iterations() * kSteps);
}
BENCHMARK(BM_FpSteps)->RangeMultiplier(2)->Range(1600, 12800);

}  // namespace
