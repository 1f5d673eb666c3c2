#include <benchmark/benchmark.h>

#include "mckv/coefficients.hpp"
#include "mckv/mollify.hpp"
#include "mckv/particles.hpp"

namespace {

mckv::ParticleCloud gaussian_cloud(std::size_t N) {
  const auto l = mckv::GridDensity::gaussian_1d(mckv::GridSpec::uniform_1d(-8.0, 8.0, 0.01), 0.0, 1.0);
  return mckv::sample_initial(l, N, 3);
}

// Density at every particle, exact neighbour sums.
void BM_KdeExact(benchmark::State& state) {
  const auto cloud = gaussian_cloud(static_cast<std::size_t>(state.range(0)));
  const mckv::MollifierFamily fam(1, 16);
  for (auto _ : state) {
    const mckv::KdeIndex index(cloud, fam);
    double sum = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) sum += index.at(cloud.particle(i));
    benchmark::DoNotOptimize(sum);
  }
}
BENCHMARK(BM_KdeExact)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Unit(benchmark::kMillisecond);

void BM_KdeBinned(benchmark::State& state) {
  const auto cloud = gaussian_cloud(static_cast<std::size_t>(state.range(0)));
  const mckv::MollifierFamily fam(1, 16);
  for (auto _ : state) {
    const mckv::BinnedKde kde(cloud, fam);
    double sum = 0.0;
    for (double x : cloud.positions) sum += kde.at(x);
    benchmark::DoNotOptimize(sum);
  }
}
BENCHMARK(BM_KdeBinned)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Unit(benchmark::kMillisecond);

void BM_EmStep(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto cloud = gaussian_cloud(N);
  const auto cs = mckv::scenario("tanh-mean");
  const mckv::MollifierFamily fam(1, 16);
  std::vector<double> noise(N);
  mckv::fill_noise(5, 0, N, 1, noise);
  const auto method = state.range(1) ? mckv::KdeMethod::binned : mckv::KdeMethod::exact;
  for (auto _ : state) benchmark::DoNotOptimize(mckv::em_step(cloud, cs, fam, 1e-3, noise, method));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmStep)
    ->ArgsProduct({{1 << 12, 1 << 15, 100000}, {0, 1}})
    ->ArgNames({"N", "binned"})
    ->Unit(benchmark::kMillisecond);

void BM_FillNoise(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  std::vector<double> noise(N);
  std::size_t step = 0;
  for (auto _ : state) {
    mckv::fill_noise(5, step++, N, 1, noise);
    benchmark::DoNotOptimize(noise.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillNoise)->Arg(100000);

}  // namespace
