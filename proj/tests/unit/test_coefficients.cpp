#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <random>

#include "mckv/coefficients.hpp"
#include "mckv/error.hpp"
#include "mckv/transport.hpp"

using namespace mckv;

namespace {

std::vector<double> drift_at(const CoefficientSet& cs, double t, std::vector<double> x, double r,
                             const DiscreteMeasure& m) {
  std::vector<double> out(cs.dim);
  cs.drift(t, x, r, MeasureView(m), out);
  return out;
}

CoefficientSet zero_drift_identity_sigma() {
  CoefficientSet cs;
  cs.name = "zero";
  cs.drift = [](double, std::span<const double>, double, const MeasureView&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  cs.diffusion = [](double, std::span<const double>, const MeasureView&, std::span<double> out) { out[0] = 1.0; };
  cs.constants = {2.0, 0.5, 1.0, 1.0};
  return cs;
}

}  // namespace

TEST_CASE("scenario catalogue") {
  CHECK(scenario_names().size() == 4);
  CHECK_THROWS_AS(scenario("no-such-scenario"), ValidationError);
  CHECK_THROWS_AS(scenario("tanh-mean", {{"dim", 0}}), ValidationError);
  CHECK_THROWS_AS(scenario("translation", {{"c", {1.0, 2.0}}}), ValidationError);
  for (const auto& name : scenario_names()) {
    const auto cs = scenario(name);
    CHECK(cs.name == name);
    CHECK_NOTHROW(cs.validate());
    CHECK(cs.descriptor()["name"] == name);
  }
}

TEST_CASE("scenario formulas") {
  const auto centered = DiscreteMeasure::uniform({-1.0, 1.0});
  CHECK(drift_at(scenario("pure-diffusion"), 0.3, {2.0}, 4.0, centered)[0] == 0.0);
  CHECK(drift_at(scenario("tanh-mean"), 0.3, {2.0}, 0.0, centered)[0] == 0.0);

  const auto shifted = DiscreteMeasure::uniform({1.0, 2.0});
  CHECK(drift_at(scenario("tanh-mean"), 0.0, {0.0}, 0.7, shifted)[0] ==
        doctest::Approx(std::tanh(0.7) + 0.5 * 1.5));
  const auto far = DiscreteMeasure::uniform({40.0});
  CHECK(drift_at(scenario("tanh-mean"), 0.0, {0.0}, 0.0, far)[0] == doctest::Approx(2.5));

  CHECK(drift_at(scenario("density-repulsion"), 0.0, {3.0}, 2.0, centered)[0] ==
        doctest::Approx(-std::atan(2.0) * 3.0 / 4.0));

  const auto tr = scenario("translation", {{"c", 1.0}, {"epsilon", 0.0}});
  CHECK(drift_at(tr, 0.0, {5.0}, 1.0, centered)[0] == 1.0);
  std::vector<double> sigma(1);
  tr.diffusion(0.0, std::vector<double>{5.0}, MeasureView(centered), sigma);
  CHECK(sigma[0] == 0.0);

  const auto tr2 = scenario("translation", {{"dim", 2}, {"c", {1.0, -2.0}}});
  const DiscreteMeasure planar{2, {0.0, 0.0}, {1.0}};
  CHECK(drift_at(tr2, 0.0, {0.0, 0.0}, 0.0, planar) == std::vector<double>{1.0, -2.0});
}

TEST_CASE("checker: constant sigma and zero drift") {
  const auto cs = zero_drift_identity_sigma();
  const auto report = check_assumptions(cs, TupleSampler{}, 500);
  CHECK(report.all_pass());
  CHECK(report.condition("diffusion_bound").worst_ratio == doctest::Approx(1.0));
  CHECK(report.condition("sigma_holder_x").worst_ratio == 0.0);
  CHECK(report.condition("sigma_lipschitz_measure").worst_ratio == 0.0);
  for (const char* name : {"drift_lipschitz_r", "drift_lipschitz_measure", "drift_lipschitz", "drift_envelope"}) {
    CHECK(report.condition(name).worst_ratio == 0.0);
  }
  CHECK(report.sample_count == 500);
}

TEST_CASE("every built-in scenario passes at 10^4 samples") {
  for (const auto& name : scenario_names()) {
    for (int dim : {1, 2}) {
      const auto cs = scenario(name, {{"dim", dim}});
      const auto report = check_assumptions(cs, TupleSampler{3, 1.0}, 10000);
      INFO(name << " dim " << dim << " " << report.to_json().dump());
      CHECK(report.all_pass());
    }
  }
}

TEST_CASE("tanh-mean constants") {
  const auto report = check_assumptions(scenario("tanh-mean"), TupleSampler{4, 1.0}, 10000);
  // tanh is 1-Lipschitz; the clipped mean term is 1/2-Lipschitz in W_1; |b| <= 1 + 5/2.
  CHECK(report.condition("drift_lipschitz_r").worst_ratio <= 1.0 + 1e-12);
  CHECK(report.condition("drift_lipschitz_measure").worst_ratio <= 0.5 + 1e-12);
  CHECK(report.condition("drift_envelope").worst_ratio <= 3.5);
  CHECK(report.condition("drift_lipschitz_r").bound == 2.0);
}

TEST_CASE("the mean functional is 1-Lipschitz in W_1") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int c = 0; c < 200; ++c) {
    std::vector<double> a(1 + c % 9), b(1 + c % 5);
    for (double& v : a) v = u(rng);
    for (double& v : b) v = u(rng);
    const auto ma = DiscreteMeasure::uniform(a);
    const auto mb = DiscreteMeasure::uniform(b);
    CHECK(std::abs(ma.mean()[0] - mb.mean()[0]) <= wasserstein_lp(ma, mb, 1.0).value + 1e-9);
  }
}

TEST_CASE("degenerate diffusion fails ellipticity") {
  const auto report = check_assumptions(scenario("translation", {{"epsilon", 0.0}}), TupleSampler{}, 100);
  CHECK_FALSE(report.all_pass());
  CHECK_FALSE(report.condition("ellipticity").pass);
  CHECK(report.to_json()["conditions"][0]["worst_ratio"] == "inf");
}

TEST_CASE("checker is deterministic across thread counts") {
  const auto cs = scenario("density-repulsion");
  omp_set_num_threads(1);
  const auto one = check_assumptions(cs, TupleSampler{9, 2.0}, 2000).to_json();
  omp_set_num_threads(4);
  const auto four = check_assumptions(cs, TupleSampler{9, 2.0}, 2000).to_json();
  CHECK(one == four);
  CHECK(one != check_assumptions(cs, TupleSampler{10, 2.0}, 2000).to_json());
}

TEST_CASE("non-finite coefficients are a hard failure naming the tuple") {
  auto cs = zero_drift_identity_sigma();
  cs.drift = [](double, std::span<const double> x, double, const MeasureView&, std::span<double> out) {
    out[0] = x[0] > 4.0 ? NAN : 0.0;
  };
  try {
    check_assumptions(cs, TupleSampler{}, 1000);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("x=(") != std::string::npos);
  }
  CHECK_THROWS_AS(check_assumptions(cs, TupleSampler{}, 0), ValidationError);
}
