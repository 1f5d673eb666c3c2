#include <doctest.h>

#include <cmath>

#include "mckv/error.hpp"
#include "mckv/fokker_planck.hpp"
#include "mckv/transport.hpp"
#include "oracles.hpp"

using namespace mckv;

namespace {

double sup_error_to_normal(const GridDensity& l, double variance) {
  double err = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    err = std::max(err, std::abs(l[i] - oracle::normal_pdf(l.spec().node(0, i), 0.0, std::sqrt(variance))));
  }
  return err;
}

}  // namespace

TEST_CASE("heat kernel formula") {
  const double zero[] = {0.0};
  CHECK(heat_kernel_eval({0.0, 0.5}, 0.25, zero) == doctest::Approx(2.0));
  const double x[] = {0.7};
  CHECK(heat_kernel_eval({1.0, 0.8}, 0.3, x) ==
        doctest::Approx(heat_kernel_eval({0.0, 0.8}, 0.3, x) / std::sqrt(0.3)).epsilon(1e-14));
  const double z2[] = {0.0, 0.0};
  CHECK(heat_kernel_eval({0.0, 0.5}, 0.25, z2) == doctest::Approx(4.0));
  for (double lambda : {0.5, 2.0}) {
    const double integral = oracle::simpson(
        [&](double y) {
          const double p[] = {y};
          return heat_kernel_eval({0.0, lambda}, 0.7, p);
        },
        -20.0, 20.0, 20000);
    CHECK(integral == doctest::Approx(std::sqrt(M_PI / lambda)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(heat_kernel_eval({0.0, 0.5}, 0.0, zero), ValidationError);
  CHECK_THROWS_AS(heat_kernel_eval({0.0, 0.0}, 1.0, zero), ValidationError);
}

TEST_CASE("heat equation from a standard normal") {
  const double dx = 0.02, dt = 1e-3;
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
  FPOptions options;
  options.record_every_step = true;
  const auto states = solve_nonlinear_fp(scenario("pure-diffusion"), l0, 1.0, dt, options);
  CHECK(states.back().time == doctest::Approx(1.0));
  CHECK(sup_error_to_normal(states.back().density, 2.0) <= 5.0 * (dx * dx + dt));
  for (std::size_t k = 1; k < states.size(); ++k) {
    // Comparison principle: no new maxima without drift.
    CHECK(states[k].density.sup_norm() <= states[k - 1].density.sup_norm() + 1e-15);
    const double mass = states[k].density.mass();
    CHECK(mass <= 1.0 + 1e-10);
    CHECK(mass >= 1.0 - states[k].leakage - 1e-10);
  }
  CHECK(states.back().leakage < 1e-6);
}

TEST_CASE("pure advection translates the profile") {
  const double dx = 0.01, dt = 0.005, c = 1.0, T = 1.0;
  const auto spec = GridSpec::uniform_1d(-6.0, 6.0, dx);
  const auto l0 = GridDensity::gaussian_1d(spec, -1.0, 0.5);
  const auto states = solve_nonlinear_fp(scenario("translation", {{"c", c}, {"epsilon", 0.0}}), l0, T, dt);
  const auto exact = GridDensity::gaussian_1d(spec, -1.0 + c * T, 0.5);
  // First-order upwind adds diffusion c dx (1 - CFL) / 2, i.e. variance c dx (1 - CFL) T.
  const double cfl = c * dt / dx;
  const double smear = std::sqrt(c * dx * (1.0 - cfl) * T);
  CHECK(wasserstein1_grid(states.back().density, exact) <= 2.0 * dx + smear);
  CHECK(states.back().density.mass() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solver rejects unsupported configurations") {
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-4.0, 4.0, 0.01), 0.0, 1.0);
  // |b| dt / dx = 3 > 1.
  CHECK_THROWS_AS(solve_nonlinear_fp(scenario("translation", {{"c", 3.0}}), l0, 0.1, 0.01), ValidationError);
  FPOptions bad;
  bad.snapshot_times = {0.015};
  CHECK_THROWS_AS(solve_nonlinear_fp(scenario("pure-diffusion"), l0, 0.1, 0.01, bad), ValidationError);
  auto cs = scenario("pure-diffusion");
  cs.diffusion_reads_measure = true;
  CHECK_THROWS_AS(solve_nonlinear_fp(cs, l0, 0.1, 0.01), ValidationError);
  GridSpec plane{{0.0, 0.0}, {0.1, 0.1}, {10, 10}};
  GridDensity flat(plane, std::vector<double>(100, 1.0));
  CHECK_THROWS_AS(solve_nonlinear_fp(scenario("pure-diffusion", {{"dim", 2}}), flat, 0.1, 0.01), ValidationError);
}

TEST_CASE("snapshots and fixed-point sweeps") {
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.02), 0.0, 1.0);
  FPOptions one;
  one.snapshot_times = {0.25, 0.5};
  const auto a = solve_nonlinear_fp(scenario("tanh-mean"), l0, 0.5, 1e-3, one);
  REQUIRE(a.size() == 3);
  CHECK(a[0].time == 0.0);
  CHECK(a[1].time == doctest::Approx(0.25));
  FPOptions many = one;
  many.fixed_point_iterations = 20;
  const auto b = solve_nonlinear_fp(scenario("tanh-mean"), l0, 0.5, 1e-3, many);
  // Lagging the density argument costs O(dt).
  CHECK(wasserstein1_grid(a.back().density, b.back().density) < 1e-2);
  int calls = 0;
  FPOptions watched;
  watched.observer = [&](const FPState&) { ++calls; };
  solve_nonlinear_fp(scenario("tanh-mean"), l0, 0.1, 1e-2, watched);
  CHECK(calls == 11);
}

TEST_CASE("near-delta start matches the Gaussian kernel") {
  const double dx = 0.01, dt = 1e-3, T = 0.5;
  const double s0 = 3.0 * dx;
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-5.0, 5.0, dx), 0.0, s0);
  const auto states = solve_nonlinear_fp(scenario("pure-diffusion"), l0, T, dt);
  const double tau = T + s0 * s0;
  double err = 0.0;
  const auto& l = states.back().density;
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double x[] = {l.spec().node(0, i)};
    err = std::max(err, std::abs(l[i] - heat_kernel_eval({0.0, 0.5}, tau, x) / std::sqrt(2.0 * M_PI)));
  }
  CHECK(err <= 5.0 * (dx * dx + dt));
}

TEST_CASE("Duhamel residual") {
  SUBCASE("no drift: smoothing of the initial density") {
    const double dx = 0.02, dt = 1e-3;
    const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
    FPOptions options;
    options.record_every_step = true;
    const auto states = solve_nonlinear_fp(scenario("pure-diffusion"), l0, 1.0, dt, options);
    CHECK(duhamel_residual(states, scenario("pure-diffusion"), 1.0) <= 5.0 * (dx * dx + dt));
  }
  SUBCASE("translation with unit noise, and refinement") {
    const auto cs = scenario("translation", {{"c", 1.0}, {"epsilon", 1.0}});
    auto residual = [&](double dx, double dt) {
      const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
      DuhamelAccumulator acc(cs, 1.0, l0, 0.5);
      FPOptions options;
      options.observer = [&](const FPState& s) { acc.add(s); };
      const auto states = solve_nonlinear_fp(cs, l0, 0.5, dt, options);
      return acc.residual(states.back().density);
    };
    const double coarse = residual(0.01, 1e-3);
    const double fine = residual(0.005, 2.5e-4);
    CHECK(fine <= 10.0 * (0.005 + std::sqrt(2.5e-4)));
    CHECK(fine < coarse);
  }
  SUBCASE("streaming and batch forms agree") {
    const auto cs = scenario("tanh-mean");
    const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.04), 0.0, 1.0);
    FPOptions options;
    options.record_every_step = true;
    const auto states = solve_nonlinear_fp(cs, l0, 0.2, 2e-3, options);
    DuhamelAccumulator acc(cs, 1.0, l0, 0.2);
    for (const auto& s : states) acc.add(s);
    CHECK(acc.residual(states.back().density) == doctest::Approx(duhamel_residual(states, cs, 1.0)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(DuhamelAccumulator(scenario("translation", {{"epsilon", 0.0}}), 0.0,
                                     GridDensity::gaussian_1d(GridSpec::uniform_1d(-1, 1, 0.1), 0, 1), 1.0),
                  ValidationError);
}
