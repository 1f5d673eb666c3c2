#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "mckv/coefficients.hpp"
#include "mckv/grid.hpp"
#include "mckv/particles.hpp"

namespace mckv {

/// exp{2 sqrt(T) (1 + ||l||_inf + M_1)} with sup-norm and first moment taken
/// by grid quadrature.
double lambda_bound(const GridDensity& l_nu1, double T);

struct StabilityOptions {
  double fp_dt = 1e-3;
  /// Times at which the weighted TV is sampled (multiples of fp_dt and of the
  /// particle dt). Empty: 20 equally spaced times.
  std::vector<double> times;
  bool particle_path = false;
  std::size_t assumption_samples = 200;
  std::uint64_t assumption_seed = 7;
};

struct StabilityPoint {
  double t = 0.0;
  double wtv = 0.0;
  std::optional<double> wtv_particle;
};

struct StabilityReport {
  double initial_wtv = 0.0;
  double sup_wtv = 0.0;
  double lambda_bound = 0.0;
  double ratio = 0.0;  ///< sup_wtv / (lambda_bound * initial_wtv)
  std::vector<StabilityPoint> series;
  // Particle path, when requested.
  std::optional<double> initial_wtv_particle;
  std::optional<double> sup_wtv_particle;
  std::optional<double> ratio_particle;
  double max_leakage = 0.0;

  nlohmann::json to_json() const;
};

/// Weighted-TV stability between the solutions started from l_nu1 and l_nu2
/// (same grid). The Fokker-Planck oracle is always run; the particle path
/// (common seeds, KDE on the same grid) is optional. Rejects coefficient sets
/// outside the p = 1, bounded drift, distribution-free sigma regime.
StabilityReport stability_experiment(const CoefficientSet& cs, const GridDensity& l_nu1, const GridDensity& l_nu2,
                                     const SimConfig& config, const StabilityOptions& options = {});

struct ConvergenceOptions {
  double min_time_fraction = 0.05;
  /// Band multiplier for the monotonicity check.
  double band = 2.0;
  /// Extra runs with shifted seeds at the smallest n to measure the noise
  /// floor directly (0 = plug-in estimate only).
  std::size_t noise_repeats = 0;
};

struct ConvergenceReport {
  std::vector<unsigned> n_values;
  /// sup over snapshot times of W_p between the runs for n_values[k] and n_values[k+1].
  std::vector<double> cauchy_distances;
  /// Plug-in Monte Carlo floor for each pair (largest over the times used).
  std::vector<double> noise_floors;
  double noise_floor = 0.0;
  std::vector<double> repeated_seed_distances;
  std::size_t N = 0;
  double dt = 0.0;
  double p = 1.0;
  bool monotone = false;
  bool conclusive = false;
  bool bounded_by_first = false;

  nlohmann::json to_json() const;
};

/// Runs simulate for every n with common seed, N and dt and reports the
/// consecutive-n Cauchy distances.
ConvergenceReport mollifier_convergence_study(const CoefficientSet& cs, const GridDensity& l_nu,
                                              const SimConfig& base_config, const std::vector<unsigned>& n_list,
                                              const ConvergenceOptions& options = {});

}  // namespace mckv
