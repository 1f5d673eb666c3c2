#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mckv {

class GridDensity;

/// Finitely supported probability measure on R^d.
struct DiscreteMeasure {
  std::size_t dim = 1;
  std::vector<double> points;  ///< size() * dim coordinates, row-major
  std::vector<double> weights;

  /// Equal weights 1/n on the given points.
  static DiscreteMeasure uniform(std::vector<double> points, std::size_t dim = 1);
  /// Atoms at the grid's cell centres with weights value * cell volume,
  /// renormalized to unit mass. Zero cells are kept.
  static DiscreteMeasure from_grid(const GridDensity& density);

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dim, dim};
  }
  std::vector<double> mean() const;

  /// Shapes agree, weights nonnegative and summing to 1 within 1e-12.
  void validate() const;
};

/// Coupling between two discrete measures; row i is source atom i.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> mass;  ///< rows * cols entries

  double operator()(std::size_t i, std::size_t j) const { return mass[i * cols + j]; }
  /// Largest deviation of row/column sums from the marginal weights.
  double marginal_error(const DiscreteMeasure& source, const DiscreteMeasure& target) const;
};

/// CSV with header x0,...,x{d-1},weight and one row per atom.
void write_measure_csv(std::ostream& out, const DiscreteMeasure& measure);
DiscreteMeasure read_measure_csv(std::istream& in);

}  // namespace mckv
