#include <doctest.h>

#include <cmath>
#include <random>

#include "mckv/diagnostics.hpp"
#include "mckv/error.hpp"
#include "mckv/transport.hpp"
#include "oracles.hpp"

using namespace mckv;

namespace {

const GridSpec kLine = GridSpec::uniform_1d(-8.0, 8.0, 0.005);

std::vector<double> dyadic_times(double T, int levels) {
  std::vector<double> t;
  for (int k = levels - 1; k >= 0; --k) t.push_back(T * std::exp2(-k));
  return t;
}

}  // namespace

TEST_CASE("density snapshot of a uniform cloud") {
  const auto unit = GridDensity::uniform_1d(GridSpec::uniform_1d(-1.0, 2.0, 0.001), 0.0, 1.0);
  const auto cloud = sample_initial(unit, 100000, 3);
  const MollifierFamily fam(1, 16);
  const auto snap = density_snapshot(cloud, fam, GridSpec::uniform_1d(-1.0, 2.0, 0.01));
  for (std::size_t i = 0; i < snap.density.size(); ++i) {
    const double x = snap.density.spec().node(0, i);
    if (x >= 0.2 && x <= 0.8) CHECK(std::abs(snap.density[i] - 1.0) <= 0.08);
  }
  CHECK(snap.density.mass() + snap.off_grid_mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(snap.off_grid_mass) < 1e-3);
}

TEST_CASE("density snapshot of a point mass is the kernel") {
  const MollifierFamily fam(1, 8);
  const ParticleCloud at_zero{1, std::vector<double>(10, 0.0), 0.0};
  const auto grid = GridSpec::uniform_1d(-1.0, 1.0, 0.01);
  const auto snap = density_snapshot(at_zero, fam, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x[] = {grid.node(0, i)};
    CHECK(snap.density[i] == doctest::Approx(mollifier_eval(fam, x)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(density_snapshot(at_zero, fam, GridSpec::uniform_1d(-1.0, 1.0, 0.1)), ValidationError);
}

TEST_CASE("Hoelder fit: Brownian motion from a near-point mass has exponent one half") {
  SimConfig c;
  c.N = 20000;
  c.T = 1.0;
  c.dt = 1.0 / 1024.0;
  c.seed = 8;
  c.snapshot_times = dyadic_times(1.0, 8);
  const auto store =
      simulate(c, scenario("pure-diffusion"), GridDensity::gaussian_1d(kLine, 0.0, 3.0 * kLine.cell_width[0]));
  const auto fit = holder_time_fit(store, 1.0);
  REQUIRE(fit.exponent_fit);
  CHECK(*fit.exponent_fit >= 0.4);
  CHECK(*fit.exponent_fit <= 0.6);
  CHECK(fit.pass);
  CHECK(fit.fitted_constant > 0.0);
}

TEST_CASE("Hoelder fit: deterministic translation has exponent one") {
  SimConfig c;
  c.N = 2000;
  c.T = 1.0;
  c.dt = 1.0 / 256.0;
  c.snapshot_times = dyadic_times(1.0, 6);
  const auto store = simulate(c, scenario("translation", {{"c", 2.0}, {"epsilon", 0.0}}),
                              GridDensity::gaussian_1d(kLine, 0.0, 1.0));
  const auto fit = holder_time_fit(store, 2.0);
  REQUIRE(fit.exponent_fit);
  CHECK(*fit.exponent_fit == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fit.fitted_constant == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("Hoelder fit: frozen cloud is degenerate; too few gaps is an error") {
  SimConfig c;
  c.N = 100;
  c.T = 1.0;
  c.dt = 1.0 / 64.0;
  c.snapshot_times = dyadic_times(1.0, 5);
  const auto frozen = scenario("translation", {{"c", 0.0}, {"epsilon", 0.0}});
  const auto store = simulate(c, frozen, GridDensity::gaussian_1d(kLine, 0.0, 1.0));
  const auto fit = holder_time_fit(store, 1.0);
  CHECK(fit.degenerate);
  CHECK_FALSE(fit.pass);
  CHECK_FALSE(fit.exponent_fit);

  c.snapshot_times = {0.5, 1.0};
  CHECK_THROWS_AS(holder_time_fit(simulate(c, frozen, GridDensity::gaussian_1d(kLine, 0.0, 1.0)), 1.0),
                  ValidationError);
}

TEST_CASE("tails and moments") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  ParticleCloud inside{1, {}, 0.0};
  for (int i = 0; i < 1000; ++i) inside.positions.push_back(u(rng));
  const double r2[] = {2.0};
  CHECK(tail_and_moments(inside, 1.0, r2).details["tails"][0]["tail"] == 0.0);

  std::normal_distribution<double> g(0.0, 1.0);
  ParticleCloud normal{1, std::vector<double>(1000000), 0.0};
  for (double& v : normal.positions) v = g(rng);
  const double radii[] = {0.5, 1.0, 2.0, 3.0, 5.0};
  const auto rep = tail_and_moments(normal, 1.0, radii);
  const double expected = 2.0 * oracle::normal_pdf(3.0);  // E[|Z|; |Z| > 3]
  CHECK(std::abs(rep.details["tails"][3]["tail"].get<double>() - expected) <= 0.3 * expected);
  for (std::size_t k = 1; k < 5; ++k) {
    CHECK(rep.details["tails"][k]["tail"].get<double>() <= rep.details["tails"][k - 1]["tail"].get<double>());
  }
  CHECK(rep.details["moment"].get<double>() == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(5e-3));

  ParticleCloud outside{1, {}, 0.0};
  for (int i = 0; i < 500; ++i) outside.positions.push_back((i % 2 ? 1.0 : -1.0) * (1.0 + std::abs(g(rng))));
  double previous = 0.0;
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const double m = tail_and_moments(outside, p, {}).details["moment"].get<double>();
    CHECK(m >= previous);
    previous = m;
  }
}

TEST_CASE("Krylov functionals") {
  SimConfig c;
  c.N = 20000;
  c.T = 1.0;
  c.dt = 0.005;
  c.seed = 17;
  c.dense = true;
  const auto store = simulate(c, scenario("pure-diffusion"), GridDensity::gaussian_1d(kLine, 0.0, 1.0));
  for (int j : {1, 2, 3}) {
    const auto one = krylov_functional(store, [](double, std::span<const double>) { return 1.0; }, j);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
    const auto half = krylov_functional(store, [](double s, std::span<const double>) { return s < 0.5 ? 1.0 : 0.0; }, j);
    CHECK(half.value == doctest::Approx(std::pow(0.5, j)).epsilon(1e-12));
  }
  const auto inside = krylov_functional(
      store, [](double, std::span<const double> x) { return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0; }, 1);
  const double expected = oracle::simpson(
      [](double s) {
        const double sd = std::sqrt(1.0 + s);
        return oracle::normal_cdf(1.0, 0.0, sd) - oracle::normal_cdf(-1.0, 0.0, sd);
      },
      0.0, 1.0, 200);
  CHECK(std::abs(inside.value - expected) <= 3.0 * inside.standard_error);
  CHECK(inside.paths == c.N);

  SimConfig sparse = c;
  sparse.dense = false;
  sparse.N = 10;
  const auto no_paths = simulate(sparse, scenario("pure-diffusion"), GridDensity::gaussian_1d(kLine, 0.0, 1.0));
  CHECK_THROWS_AS(krylov_functional(no_paths, [](double, std::span<const double>) { return 1.0; }, 1),
                  ValidationError);
}

TEST_CASE("plug-in noise floor matches repeated independent samples") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t n = 2000;
  double mean_w1 = 0.0;
  const int repeats = 200;
  std::vector<double> a(n), b(n);
  for (int r = 0; r < repeats; ++r) {
    for (double& v : a) v = g(rng);
    for (double& v : b) v = g(rng);
    mean_w1 += wasserstein_1d_samples(a, b, 1.0) / repeats;
  }
  for (double& v : a) v = g(rng);
  CHECK(mc_noise_floor_w1(a) == doctest::Approx(mean_w1).epsilon(0.15));
}
