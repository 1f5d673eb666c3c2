#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mckv {

/// Uniform rectangular grid of cells. `origin` is the lower corner of the
/// domain; node i along an axis sits at the cell centre origin + (i + 1/2) h.
/// Flat indices are row-major with the last axis fastest.
struct GridSpec {
  std::vector<double> origin;
  std::vector<double> cell_width;
  std::vector<std::size_t> cells;

  /// Cells covering [lo, hi] with width (hi - lo) / round((hi - lo) / h).
  static GridSpec uniform_1d(double lo, double hi, double h);

  std::size_t dim() const { return cells.size(); }
  std::size_t size() const;
  double cell_volume() const;
  double lower(std::size_t axis) const { return origin[axis]; }
  double upper(std::size_t axis) const;
  double node(std::size_t axis, std::size_t i) const;
  void node(std::size_t flat, std::span<double> out) const;
  /// Same node layout within a relative tolerance of 1e-12.
  bool same_as(const GridSpec& other) const;
  void validate() const;
};

/// A density represented by its values at cell centres, read as a
/// piecewise-constant function; all quadrature is the midpoint rule.
class GridDensity {
 public:
  GridDensity() = default;
  GridDensity(GridSpec spec, std::vector<double> values);

  /// Evaluates `f` at every node.
  static GridDensity from_function(const GridSpec& spec,
                                   const std::function<double(std::span<const double>)>& f);
  /// Exact cell averages of N(mean, sd^2), rescaled to unit mass on the grid.
  static GridDensity gaussian_1d(const GridSpec& spec, double mean, double sd);
  /// Indicator of [a, b] (cell-overlap weighted), rescaled to unit mass.
  static GridDensity uniform_1d(const GridSpec& spec, double a, double b);

  const GridSpec& spec() const { return spec_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double mass() const;
  double sup_norm() const;
  /// Midpoint-rule integral of |x|^p times the density.
  double moment(double p) const;
  /// Value at x of the piecewise-constant extension (0 outside the grid).
  double at(std::span<const double> x) const;
  /// Copy shifted by `offset` along axis 0 (values are carried, grid moves).
  GridDensity translated(double offset) const;

  /// Nonnegative values and mass in [0, 1 + 1e-6].
  void validate() const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

/// CSV with header x0,...,x{d-1},value and one row per node.
void write_grid_csv(std::ostream& out, const GridDensity& density);
GridDensity read_grid_csv(std::istream& in);

}  // namespace mckv
