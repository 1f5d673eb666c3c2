#pragma once

#include <cstddef>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mckv/grid.hpp"
#include "mckv/mollify.hpp"
#include "mckv/particle_cloud.hpp"
#include "mckv/particles.hpp"

namespace mckv {

struct EstimateReport {
  std::string name;
  double fitted_constant = 0.0;
  std::optional<double> exponent_fit;
  bool pass = false;
  /// The fit could not be formed (e.g. all distances zero).
  bool degenerate = false;
  nlohmann::json samples = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct SnapshotDensity {
  GridDensity density;
  /// 1 - (grid quadrature of the KDE): kernel mass that falls off the grid.
  double off_grid_mass = 0.0;
};

/// Exact KDE of the cloud evaluated at the grid nodes. The grid must resolve
/// the kernel (cell width below 1/(2n) on every axis).
SnapshotDensity density_snapshot(const ParticleCloud& cloud, const MollifierFamily& fam, const GridSpec& grid);

struct HolderFitOptions {
  double min_time_fraction = 0.05;  ///< pairs need both times >= this * T
  double pass_slope = 0.4;
  double zero_distance = 1e-15;
};

/// One (s, t, W) observation of the time-continuity fit.
struct HolderPair {
  double s = 0.0;
  double t = 0.0;
  double distance = 0.0;
};

/// Fits log W = log c2 + delta log |t - s| by least squares over pairs whose
/// gap is a dyadic fraction T 2^{-k} of the horizon. `distance(i, j)` returns
/// W_p between the marginals at times[i] and times[j].
EstimateReport holder_time_fit(std::span<const double> times, double horizon,
                               const std::function<double(std::size_t, std::size_t)>& distance,
                               const HolderFitOptions& options = {});

/// Same, with exact 1-D W_p between snapshot clouds of a store.
EstimateReport holder_time_fit(const TrajectoryStore& store, double p, const HolderFitOptions& options = {});

/// Empirical M_p and tail values phi(R) = (1/N) sum |X_i|^p 1{|X_i| > R}.
EstimateReport tail_and_moments(const ParticleCloud& cloud, double p, std::span<const double> radii);

struct KrylovEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t paths = 0;
};

/// Monte Carlo estimate of E[(int_0^T g(s, X_s) ds)^j] from dense paths,
/// with left-endpoint Riemann sums per particle.
KrylovEstimate krylov_functional(const TrajectoryStore& store,
                                 const std::function<double(double, std::span<const double>)>& g, int j);

/// Expected W_1 between two independent N-samples of the law whose sample is
/// given: sqrt(2) * sqrt(2/pi) * int sqrt(F(1-F)) dx / sqrt(N), with F the
/// empirical CDF (large-N Gaussian approximation).
double mc_noise_floor_w1(std::span<const double> samples);

}  // namespace mckv
