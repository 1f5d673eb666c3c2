#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "mckv/coefficients.hpp"
#include "mckv/grid.hpp"
#include "mckv/mollify.hpp"
#include "mckv/particle_cloud.hpp"

namespace mckv {

/// How em_step evaluates the density feedback r_i. `exact` sums the kernel
/// over neighbours (KdeIndex); `binned` uses BinnedKde (1-D only, falls back
/// to exact otherwise).
enum class KdeMethod { exact, binned };

std::string to_string(KdeMethod method);
KdeMethod kde_method_from_string(const std::string& text);

struct SimConfig {
  std::size_t N = 1000;
  std::size_t dim = 1;
  double T = 1.0;
  double dt = 0.01;
  unsigned n_mollifier = 16;
  std::uint64_t seed = 1;
  std::vector<double> snapshot_times;  ///< t = 0 is always recorded as well
  double p = 1.0;
  bool dense = false;  ///< keep every particle path at every step
  KdeMethod kde = KdeMethod::binned;
  double wall_budget_seconds = 0.0;  ///< 0 = unlimited

  std::size_t steps() const;
  /// Sorted snapshot times with 0 prepended (duplicates removed).
  std::vector<double> recorded_times() const;
  void validate() const;
  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

struct Snapshot {
  double time = 0.0;
  ParticleCloud cloud;
};

struct TrajectoryStore {
  std::vector<Snapshot> snapshots;
  /// Dense mode: positions after every step, (steps + 1) x N x d, and the times.
  std::vector<double> dense_times;
  std::vector<double> dense_positions;
  std::size_t particles = 0;
  std::size_t dim = 1;
  nlohmann::json metadata = nlohmann::json::object();
  bool complete = true;

  bool has_dense() const { return !dense_times.empty(); }
  std::span<const double> dense_step(std::size_t k) const {
    return {dense_positions.data() + k * particles * dim, particles * dim};
  }
  const Snapshot& at_time(double t) const;
  void validate() const;
  /// Git-style SHA-256 over the binary snapshot data and the metadata JSON.
  std::string content_hash() const;
};

/// Draws N particles from a grid density: exact inverse-CDF sampling of the
/// piecewise-constant law in 1-D, rejection sampling against the grid maximum
/// in higher dimension. Particle i uses its own counter stream.
ParticleCloud sample_initial(const GridDensity& l_nu, std::size_t N, std::uint64_t seed);

/// One Euler-Maruyama step of the mollified system. Density values and the
/// empirical measure are frozen at the pre-step cloud. `noise` holds N x m
/// standard normals, row-major.
ParticleCloud em_step(const ParticleCloud& cloud, const CoefficientSet& cs, const MollifierFamily& fam,
                      double dt, std::span<const double> noise, KdeMethod method = KdeMethod::exact);

/// Fills `out` (N x m) with the Brownian draws of step `step`.
void fill_noise(std::uint64_t seed, std::size_t step, std::size_t N, std::size_t m, std::span<double> out);

/// Called after every step with the updated cloud.
using StepObserver = std::function<void(const ParticleCloud&)>;

TrajectoryStore simulate(const SimConfig& config, const CoefficientSet& cs, const GridDensity& l_nu,
                         const StepObserver& observer = {});

/// CSV rows t,particle,x0,...,x{d-1}.
void write_snapshot_csv(std::ostream& out, const Snapshot& snapshot);
Snapshot read_snapshot_csv(std::istream& in);

}  // namespace mckv
