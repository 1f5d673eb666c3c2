#include <benchmark/benchmark.h>

#include "mckv/rng.hpp"
#include "mckv/transport.hpp"

namespace {

mckv::DiscreteMeasure random_measure(std::size_t size, std::uint64_t stream) {
  mckv::CounterStream rng(7, stream, mckv::StreamPurpose::kFixture);
  std::vector<double> points(size);
  for (std::size_t i = 0; i < size; ++i) points[i] = rng.normals(i)[0];
  return mckv::DiscreteMeasure::uniform(std::move(points));
}

void BM_Wasserstein1d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mu = random_measure(n, 1), nu = random_measure(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mckv::wasserstein_1d(mu, nu, 1.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein1d)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity();

void BM_WassersteinLp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mu = random_measure(n, 1), nu = random_measure(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mckv::wasserstein_lp(mu, nu, 1.0).value);
}
BENCHMARK(BM_WassersteinLp)->RangeMultiplier(2)->Range(8, 64);

}  // namespace
