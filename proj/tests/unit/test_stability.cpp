#include <doctest.h>

#include <cmath>

#include "mckv/diagnostics.hpp"
#include "mckv/error.hpp"
#include "mckv/stability.hpp"
#include "oracles.hpp"

using namespace mckv;

namespace {

const GridSpec kLine = GridSpec::uniform_1d(-8.0, 8.0, 0.02);

SimConfig small_config(double T) {
  SimConfig c;
  c.N = 2000;
  c.T = T;
  c.dt = 0.01;
  c.n_mollifier = 8;
  c.seed = 3;
  return c;
}

// int (1 + |x|) |phi_s(x) - phi_s(x - shift)| dx for s^2 = 1 + t.
double translate_wtv(double t, double shift) {
  const double sd = std::sqrt(1.0 + t);
  return oracle::simpson(
      [&](double x) {
        return (1.0 + std::abs(x)) *
               std::abs(oracle::normal_pdf(x, 0.0, sd) - oracle::normal_pdf(x, shift, sd));
      },
      -12.0, 12.0, 24000);
}

}  // namespace

TEST_CASE("lambda bound") {
  const auto unit = GridDensity::uniform_1d(GridSpec::uniform_1d(-1.0, 2.0, 0.01), 0.0, 1.0);
  // sup = 1 and M_1 = 1/2, so the exponent is 2 (1 + 1 + 1/2).
  CHECK(lambda_bound(unit, 1.0) == doctest::Approx(std::exp(5.0)).epsilon(1e-9));
  CHECK(lambda_bound(unit, 0.0) == 1.0);
  CHECK(std::log(lambda_bound(unit, 2.0)) == doctest::Approx(std::sqrt(2.0) * 5.0).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_bound(unit, -1.0), ValidationError);
}

TEST_CASE("identical initial laws give zero weighted TV on both paths") {
  const auto l = GridDensity::gaussian_1d(kLine, 0.0, 1.0);
  StabilityOptions options;
  options.fp_dt = 0.01;
  options.particle_path = true;
  options.times = {0.1, 0.2};
  const auto r = stability_experiment(scenario("tanh-mean"), l, l, small_config(0.2), options);
  CHECK(r.initial_wtv == 0.0);
  CHECK(r.sup_wtv == 0.0);
  CHECK(r.ratio == 0.0);
  REQUIRE(r.sup_wtv_particle);
  CHECK(*r.sup_wtv_particle == 0.0);
  CHECK(r.series.size() == 3);
  CHECK(r.series[1].wtv_particle.has_value());
}

TEST_CASE("heat flow contracts the weighted TV between translates") {
  const double shift = 0.1;
  const auto l1 = GridDensity::gaussian_1d(kLine, 0.0, 1.0);
  const auto l2 = GridDensity::gaussian_1d(kLine, shift, 1.0);
  StabilityOptions options;
  options.fp_dt = 1e-3;
  options.times = {0.25, 0.5, 0.75, 1.0};
  const auto r = stability_experiment(scenario("pure-diffusion"), l1, l2, small_config(1.0), options);
  for (std::size_t k = 0; k < r.series.size(); ++k) {
    CHECK(r.series[k].wtv == doctest::Approx(translate_wtv(r.series[k].t, shift)).epsilon(5e-3));
    if (k > 0) CHECK(r.series[k].wtv <= r.series[k - 1].wtv + 1e-12);
  }
  CHECK(r.sup_wtv == doctest::Approx(r.initial_wtv));
  CHECK(r.ratio < 0.1);
  CHECK(r.max_leakage < 1e-6);
}

TEST_CASE("tanh-mean translate stays below the Gronwall reference") {
  const auto l1 = GridDensity::gaussian_1d(kLine, 0.0, 1.0);
  const auto l2 = GridDensity::gaussian_1d(kLine, 0.1, 1.0);
  StabilityOptions options;
  options.fp_dt = 1e-3;
  const auto r = stability_experiment(scenario("tanh-mean"), l1, l2, small_config(1.0), options);
  CHECK(r.ratio <= 1.0);
  CHECK(r.ratio > 0.0);
  CHECK(r.series.size() == 21);
  const auto j = r.to_json();
  CHECK(j["series"].size() == 21);
  CHECK(j["ratio_particle"].is_null());
}

TEST_CASE("stability rejects coefficient sets outside its regime") {
  const auto l = GridDensity::gaussian_1d(kLine, 0.0, 1.0);
  auto cs = scenario("tanh-mean");
  cs.constants.p = 2.0;
  CHECK_THROWS_AS(stability_experiment(cs, l, l, small_config(0.1)), ValidationError);
  cs = scenario("tanh-mean");
  cs.diffusion_reads_measure = true;
  CHECK_THROWS_AS(stability_experiment(cs, l, l, small_config(0.1)), ValidationError);
  CHECK_THROWS_AS(stability_experiment(scenario("translation", {{"epsilon", 0.0}}), l, l, small_config(0.1)),
                  ValidationError);
  const auto other = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.04), 0.0, 1.0);
  CHECK_THROWS_AS(stability_experiment(scenario("tanh-mean"), l, other, small_config(0.1)), ValidationError);
}

TEST_CASE("convergence study") {
  const auto l = GridDensity::gaussian_1d(kLine, 0.0, 1.0);
  SimConfig c = small_config(0.5);
  c.snapshot_times = {0.25, 0.5};

  SUBCASE("no density dependence: n enters nowhere") {
    const auto r = mollifier_convergence_study(scenario("pure-diffusion"), l, c, {4, 8, 16});
    for (double d : r.cauchy_distances) CHECK(d == 0.0);
    CHECK_FALSE(r.conclusive);
    CHECK(r.monotone);
  }
  SUBCASE("tanh-mean report shape") {
    ConvergenceOptions options;
    options.noise_repeats = 2;
    const auto r = mollifier_convergence_study(scenario("tanh-mean"), l, c, {4, 8, 16, 32}, options);
    CHECK(r.cauchy_distances.size() == 3);
    CHECK(r.noise_floors.size() == 3);
    CHECK(r.repeated_seed_distances.size() == 2);
    for (double d : r.cauchy_distances) CHECK(d >= 0.0);
    CHECK(r.noise_floor > 0.0);
    CHECK(r.to_json()["n_values"].size() == 4);
  }
  SUBCASE("noise floor follows the square-root law") {
    SimConfig big = c;
    big.N = 4 * c.N;
    const auto a = mollifier_convergence_study(scenario("pure-diffusion"), l, c, {4, 8, 16});
    const auto b = mollifier_convergence_study(scenario("pure-diffusion"), l, big, {4, 8, 16});
    CHECK(a.noise_floor / b.noise_floor == doctest::Approx(2.0).epsilon(0.15));
  }
  CHECK_THROWS_AS(mollifier_convergence_study(scenario("tanh-mean"), l, c, {4, 8}), ValidationError);
  CHECK_THROWS_AS(mollifier_convergence_study(scenario("tanh-mean"), l, c, {4, 16, 8}), ValidationError);
}
