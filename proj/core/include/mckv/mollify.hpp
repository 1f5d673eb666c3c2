#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mckv/grid.hpp"
#include "mckv/particle_cloud.hpp"

namespace mckv {

/// Radial bump exp(-1/(1-|x|^2)) on the unit ball, scaled to unit mass in R^d.
class BaseKernel {
 public:
  /// Normalization is computed once per dimension and cached.
  static BaseKernel bump(std::size_t dim);

  std::size_t dim() const { return dim_; }
  double normalization() const { return normalization_; }
  std::string name() const { return "bump"; }

  /// Unnormalized profile as a function of |x|^2; zero for |x| >= 1.
  static double profile(double r2) {
    return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
  }
  /// rho(x) = normalization * profile(|x|^2).
  double operator()(std::span<const double> x) const;
  double at_radius_squared(double r2) const { return normalization_ * profile(r2); }

 private:
  BaseKernel(std::size_t dim, double normalization) : dim_(dim), normalization_(normalization) {}
  std::size_t dim_;
  double normalization_;
};

/// rho^n(x) = n^d rho(n x), supported in the ball of radius 1/n.
class MollifierFamily {
 public:
  MollifierFamily(BaseKernel base, unsigned n);
  MollifierFamily(std::size_t dim, unsigned n) : MollifierFamily(BaseKernel::bump(dim), n) {}

  const BaseKernel& base() const { return base_; }
  unsigned n() const { return n_; }
  std::size_t dim() const { return base_.dim(); }
  double radius() const { return 1.0 / static_cast<double>(n_); }
  /// n^d, the factor in front of rho(n x).
  double scale() const { return scale_; }
  /// rho^n(0), the largest value the kernel takes.
  double peak() const { return scale_ * base_.at_radius_squared(0.0); }

  /// rho^n evaluated at a point whose squared distance to the centre is d2.
  double at_distance_squared(double d2) const {
    const double nn = static_cast<double>(n_) * static_cast<double>(n_);
    return scale_ * base_.at_radius_squared(nn * d2);
  }

 private:
  BaseKernel base_;
  unsigned n_;
  double scale_;
};

double mollifier_eval(const MollifierFamily& fam, std::span<const double> x);

/// Kernel density estimate (1/N) sum_i rho^n(x - X_i) with neighbour
/// pruning. Particles are kept in a fixed canonical order (by position in 1-D,
/// by cell then position in higher dimension) and contributions are summed
/// in that order, so the pruned result equals the full sum bit for bit.
class KdeIndex {
 public:
  KdeIndex(const ParticleCloud& cloud, const MollifierFamily& fam);

  double at(std::span<const double> x) const;
  /// Full O(N) sum in the canonical order, with no pruning.
  double at_unpruned(std::span<const double> x) const;
  std::size_t size() const { return count_; }

 private:
  double contribution(std::size_t k, std::span<const double> x) const;
  std::vector<long> cell_of(std::span<const double> x) const;

  MollifierFamily fam_;
  std::size_t dim_;
  std::size_t count_;
  std::vector<double> sorted_;  ///< canonical order, count_ * dim_
  // Higher-dimensional cell list: sorted cell keys and their particle ranges.
  std::vector<std::vector<long>> cell_keys_;
  std::vector<std::size_t> cell_start_;
};

/// One-off KDE evaluation (builds a KdeIndex).
double kde_at(const ParticleCloud& cloud, const MollifierFamily& fam, std::span<const double> x);

/// Approximate 1-D KDE for evaluation at many points: particle mass is
/// linearly binned onto a fine lattice (spacing 1/(64 n)), convolved with the
/// sampled kernel, and read back by linear interpolation.
class BinnedKde {
 public:
  static constexpr int kBinsPerRadius = 64;

  BinnedKde(const ParticleCloud& cloud, const MollifierFamily& fam) : BinnedKde(cloud.positions, fam) {}
  /// Positions of a 1-D cloud; binning follows the given order.
  BinnedKde(std::span<const double> positions, const MollifierFamily& fam);
  double at(double x) const;

 private:
  double origin_ = 0.0;
  double spacing_ = 1.0;
  std::vector<double> values_;
};

/// Discrete convolution of a grid density with rho^n using kernel weights
/// sampled at node offsets and renormalized to sum to one. Mass that the
/// kernel pushes past the grid edge is dropped.
GridDensity mollify_grid(const GridDensity& l, const MollifierFamily& fam);

}  // namespace mckv
