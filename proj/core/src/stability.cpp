#include "mckv/stability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mckv/diagnostics.hpp"
#include "mckv/error.hpp"
#include "mckv/fokker_planck.hpp"
#include "mckv/io.hpp"
#include "mckv/measure.hpp"
#include "mckv/mollify.hpp"
#include "mckv/transport.hpp"

namespace mckv {

double lambda_bound(const GridDensity& l_nu1, double T) {
  if (!(T >= 0.0)) throw ValidationError("lambda_bound: T must be nonnegative");
  return std::exp(2.0 * std::sqrt(T) * (1.0 + l_nu1.sup_norm() + l_nu1.moment(1.0)));
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void require_stability_regime(const CoefficientSet& cs, const StabilityOptions& options) {
  if (cs.constants.p != 1.0) throw ValidationError("stability: the coefficient set must declare p = 1");
  if (cs.diffusion_reads_measure) throw ValidationError("stability: sigma must be distribution free");
  if (!std::isfinite(cs.constants.f0_bound)) throw ValidationError("stability: the drift must be bounded");
  TupleSampler sampler;
  sampler.seed = options.assumption_seed;
  const auto report = check_assumptions(cs, sampler, options.assumption_samples);
  if (!report.all_pass()) {
    std::string failed;
    for (const auto& c : report.conditions) {
      if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.name;
    }
    throw ValidationError("stability: coefficient set '" + cs.name + "' fails the standing assumptions (" + failed +
                          ")");
  }
}

}  // namespace

nlohmann::json StabilityReport::to_json() const {
  nlohmann::json j;
  j["initial_wtv"] = initial_wtv;
  j["sup_wtv"] = sup_wtv;
  j["lambda_bound"] = lambda_bound;
  j["ratio"] = ratio;
  j["initial_wtv_particle"] = optional_json(initial_wtv_particle);
  j["sup_wtv_particle"] = optional_json(sup_wtv_particle);
  j["ratio_particle"] = optional_json(ratio_particle);
  j["max_leakage"] = max_leakage;
  auto& rows = j["series"] = nlohmann::json::array();
  for (const auto& p : series) {
    rows.push_back({{"t", p.t}, {"wtv", p.wtv}, {"wtv_particle", optional_json(p.wtv_particle)}});
  }
  return j;
}

StabilityReport stability_experiment(const CoefficientSet& cs, const GridDensity& l_nu1, const GridDensity& l_nu2,
                                     const SimConfig& config, const StabilityOptions& options) {
  if (!l_nu1.spec().same_as(l_nu2.spec())) throw ValidationError("stability: initial densities on different grids");
  l_nu1.validate();
  l_nu2.validate();
  require_stability_regime(cs, options);

  const double T = config.T;
  std::vector<double> times = options.times;
  if (times.empty()) {
    for (int k = 1; k <= 20; ++k) times.push_back(T * k / 20.0);
  }
  std::sort(times.begin(), times.end());

  FPOptions fp;
  fp.snapshot_times = times;
  const auto run1 = solve_nonlinear_fp(cs, l_nu1, T, options.fp_dt, fp);
  const auto run2 = solve_nonlinear_fp(cs, l_nu2, T, options.fp_dt, fp);

  StabilityReport report;
  report.lambda_bound = lambda_bound(l_nu1, T);
  for (std::size_t k = 0; k < run1.size(); ++k) {
    const double w = weighted_tv(run1[k].density, run2[k].density, 1.0).total;
    if (k == 0) report.initial_wtv = w;
    report.sup_wtv = std::max(report.sup_wtv, w);
    report.series.push_back({run1[k].time, w, std::nullopt});
    report.max_leakage = std::max({report.max_leakage, run1[k].leakage, run2[k].leakage});
  }
  const auto ratio_of = [&](double sup, double initial) {
    if (initial > 0.0) return sup / (report.lambda_bound * initial);
    return sup == 0.0 ? 0.0 : INFINITY;
  };
  report.ratio = ratio_of(report.sup_wtv, report.initial_wtv);

  if (options.particle_path) {
    SimConfig sim = config;
    sim.snapshot_times = times;
    const auto store1 = simulate(sim, cs, l_nu1);
    const auto store2 = simulate(sim, cs, l_nu2);
    const MollifierFamily fam(1, sim.n_mollifier);
    double sup = 0.0;
    for (std::size_t k = 0; k < store1.snapshots.size(); ++k) {
      const auto d1 = density_snapshot(store1.snapshots[k].cloud, fam, l_nu1.spec());
      const auto d2 = density_snapshot(store2.snapshots[k].cloud, fam, l_nu1.spec());
      const double w = weighted_tv(d1.density, d2.density, 1.0).total;
      if (k == 0) report.initial_wtv_particle = w;
      sup = std::max(sup, w);
      if (k < report.series.size()) report.series[k].wtv_particle = w;
    }
    report.sup_wtv_particle = sup;
    report.ratio_particle = ratio_of(sup, *report.initial_wtv_particle);
  }
  return report;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["n_values"] = n_values;
  j["cauchy_distances"] = cauchy_distances;
  j["noise_floors"] = noise_floors;
  j["noise_floor"] = noise_floor;
  j["repeated_seed_distances"] = repeated_seed_distances;
  j["N"] = N;
  j["dt"] = dt;
  j["p"] = p;
  j["monotone"] = monotone;
  j["conclusive"] = conclusive;
  j["bounded_by_first"] = bounded_by_first;
  return j;
}

namespace {

double cloud_distance(const ParticleCloud& a, const ParticleCloud& b, double p, std::uint64_t seed) {
  if (a.dim == 1) return wasserstein_1d_samples(a.positions, b.positions, p);
  return wasserstein_subsampled(DiscreteMeasure::uniform(a.positions, a.dim),
                                DiscreteMeasure::uniform(b.positions, b.dim), p, seed)
      .value;
}

double cloud_noise(const ParticleCloud& a, std::uint64_t seed) {
  if (a.dim == 1) return mc_noise_floor_w1(a.positions);
  const auto m = DiscreteMeasure::uniform(a.positions, a.dim);
  return wasserstein_subsampled(m, m, 1.0, seed).bias;
}

}  // namespace

ConvergenceReport mollifier_convergence_study(const CoefficientSet& cs, const GridDensity& l_nu,
                                              const SimConfig& base_config, const std::vector<unsigned>& n_list,
                                              const ConvergenceOptions& options) {
  if (n_list.size() < 3) throw ValidationError("convergence study: need at least three mollifier indices");
  for (std::size_t k = 1; k < n_list.size(); ++k) {
    if (!(n_list[k] > n_list[k - 1])) throw ValidationError("convergence study: n values must increase strictly");
  }
  base_config.validate();

  std::vector<TrajectoryStore> runs;
  for (unsigned n : n_list) {
    SimConfig c = base_config;
    c.n_mollifier = n;
    runs.push_back(simulate(c, cs, l_nu));
  }

  const double cutoff = options.min_time_fraction * base_config.T;
  std::vector<std::size_t> used;
  for (std::size_t s = 0; s < runs.front().snapshots.size(); ++s) {
    if (runs.front().snapshots[s].time >= cutoff * (1.0 - 1e-12) && runs.front().snapshots[s].time > 0.0) {
      used.push_back(s);
    }
  }
  if (used.empty()) throw ValidationError("convergence study: no snapshot at or after 0.05 T");

  ConvergenceReport report;
  report.n_values = n_list;
  report.N = base_config.N;
  report.dt = base_config.dt;
  report.p = base_config.p;
  for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
    double sup = 0.0;
    double floor = 0.0;
    for (std::size_t s : used) {
      sup = std::max(sup, cloud_distance(runs[k].snapshots[s].cloud, runs[k + 1].snapshots[s].cloud, base_config.p,
                                         base_config.seed));
      floor = std::max(floor, cloud_noise(runs[k].snapshots[s].cloud, base_config.seed));
    }
    report.cauchy_distances.push_back(sup);
    report.noise_floors.push_back(floor);
    report.noise_floor = std::max(report.noise_floor, floor);
  }

  for (std::size_t r = 1; r <= options.noise_repeats; ++r) {
    SimConfig c = base_config;
    c.n_mollifier = n_list.front();
    c.seed = base_config.seed + 0x9E3779B97F4A7C15ull * r;
    const auto rerun = simulate(c, cs, l_nu);
    double sup = 0.0;
    for (std::size_t s : used) {
      sup = std::max(sup, cloud_distance(runs.front().snapshots[s].cloud, rerun.snapshots[s].cloud, base_config.p,
                                         base_config.seed));
    }
    report.repeated_seed_distances.push_back(sup);
  }

  const double band = options.band * report.noise_floor;
  report.monotone = true;
  report.bounded_by_first = true;
  for (std::size_t k = 1; k < report.cauchy_distances.size(); ++k) {
    report.monotone = report.monotone && report.cauchy_distances[k] <= report.cauchy_distances[k - 1] + band;
    report.bounded_by_first = report.bounded_by_first && report.cauchy_distances[k] <= report.cauchy_distances[0] + band;
  }
  report.conclusive = report.cauchy_distances.front() > report.noise_floor;
  return report;
}

}  // namespace mckv
