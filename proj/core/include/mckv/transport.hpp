#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "mckv/grid.hpp"
#include "mckv/measure.hpp"

namespace mckv {

/// Exact W_p between two 1-D discrete measures via the monotone coupling.
/// Symmetric in its arguments bit-for-bit.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// Same, for two equally weighted samples (sizes may differ). The inputs need
/// not be sorted.
double wasserstein_1d_samples(std::span<const double> a, std::span<const double> b, double p);

struct LpTransport {
  double value = 0.0;
  TransportPlan plan;
};

/// W_p in any dimension by solving the transport LP exactly (network simplex
/// on the bipartite transportation graph). Supports of at most 512 atoms.
LpTransport wasserstein_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

inline constexpr std::size_t kMaxLpSupport = 512;

/// A test function together with its claimed Lipschitz constant.
struct TestFunction {
  std::function<double(std::span<const double>)> f;
  double lipschitz = 1.0;
};

/// Returns the integral of f against mu - nu after checking the Lipschitz
/// claim (<= 1) on every pair of support points.
double kantorovich_dual_value(const TestFunction& f, const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu);

struct WeightedTv {
  double total = 0.0;       ///< integral of (1 + |x|^p) |l1 - l2|
  double unweighted = 0.0;  ///< integral of |l1 - l2|
  double moment = 0.0;      ///< integral of |x|^p |l1 - l2|
};

WeightedTv weighted_tv(const GridDensity& l1, const GridDensity& l2, double p);

/// W_1 between a 1-D discrete measure and N(mean, sd^2), computed exactly as
/// the integral of |F_mu - Phi|.
double wasserstein1_to_normal(const DiscreteMeasure& mu, double mean, double sd);
double wasserstein1_to_normal(std::span<const double> samples, double mean, double sd);

/// W_1 between a 1-D discrete measure and a grid density read as piecewise
/// constant (so its CDF is piecewise linear); the grid density is normalized.
double wasserstein1_to_grid(const DiscreteMeasure& mu, const GridDensity& density);
double wasserstein1_to_grid(std::span<const double> samples, const GridDensity& density);

/// W_1 between two 1-D grid densities on the same grid (both normalized).
double wasserstein1_grid(const GridDensity& a, const GridDensity& b);

struct SubsampledDistance {
  double value = 0.0;
  /// Mean W_p between two independent subsamples of the same measure: the
  /// order of magnitude of the subsampling bias.
  double bias = 0.0;
  std::size_t subsample_size = 0;
  bool exact = false;
};

/// W_p for large supports in any dimension: each measure is replaced by a
/// seeded resample of `size` atoms and the LP is solved on those. When both
/// supports already fit, the exact LP value is returned with bias 0.
SubsampledDistance wasserstein_subsampled(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                          double p, std::uint64_t seed,
                                          std::size_t size = kMaxLpSupport);

namespace detail {

struct SimplexResult {
  double cost = 0.0;
  std::vector<double> flow;  ///< rows * cols
  std::size_t pivots = 0;
};

/// Min-cost transportation problem with supplies `a`, demands `b` (equal
/// totals) and dense row-major cost matrix.
SimplexResult solve_transportation(std::span<const double> a, std::span<const double> b,
                                   std::span<const double> cost);

}  // namespace detail

}  // namespace mckv
