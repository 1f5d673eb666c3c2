#include "mckv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "mckv/error.hpp"
#include "mckv/io.hpp"
#include "mckv/summation.hpp"

namespace mckv {

GridSpec GridSpec::uniform_1d(double lo, double hi, double h) {
  if (!(hi > lo) || !(h > 0.0)) throw ValidationError("uniform_1d: need lo < hi and h > 0");
  const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / h));
  if (cells == 0) throw ValidationError("uniform_1d: cell width exceeds the domain");
  return GridSpec{{lo}, {(hi - lo) / static_cast<double>(cells)}, {cells}};
}

std::size_t GridSpec::size() const {
  std::size_t n = cells.empty() ? 0 : 1;
  for (auto c : cells) n *= c;
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (double h : cell_width) v *= h;
  return v;
}

double GridSpec::upper(std::size_t axis) const {
  return origin[axis] + cell_width[axis] * static_cast<double>(cells[axis]);
}

double GridSpec::node(std::size_t axis, std::size_t i) const {
  return origin[axis] + (static_cast<double>(i) + 0.5) * cell_width[axis];
}

void GridSpec::node(std::size_t flat, std::span<double> out) const {
  for (std::size_t axis = dim(); axis-- > 0;) {
    out[axis] = node(axis, flat % cells[axis]);
    flat /= cells[axis];
  }
}

bool GridSpec::same_as(const GridSpec& other) const {
  if (cells != other.cells || dim() != other.dim()) return false;
  for (std::size_t a = 0; a < dim(); ++a) {
    const double scale = std::max(1.0, std::abs(origin[a]));
    if (std::abs(origin[a] - other.origin[a]) > 1e-12 * scale) return false;
    if (std::abs(cell_width[a] - other.cell_width[a]) > 1e-12 * cell_width[a]) return false;
  }
  return true;
}

void GridSpec::validate() const {
  if (cells.empty()) throw ValidationError("grid has no axes");
  if (origin.size() != cells.size() || cell_width.size() != cells.size()) {
    throw ValidationError("grid origin/cell_width/cells dimension mismatch");
  }
  for (std::size_t a = 0; a < dim(); ++a) {
    if (cells[a] == 0) throw ValidationError("grid axis with zero cells");
    if (!(cell_width[a] > 0.0) || !std::isfinite(cell_width[a])) {
      throw ValidationError("grid cell width must be positive");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("grid origin must be finite");
  }
}

GridDensity::GridDensity(GridSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.size()) {
    throw ValidationError("grid density: " + std::to_string(values_.size()) +
                          " values for " + std::to_string(spec_.size()) + " nodes");
  }
}

GridDensity GridDensity::from_function(const GridSpec& spec,
                                       const std::function<double(std::span<const double>)>& f) {
  std::vector<double> values(spec.size());
  std::vector<double> x(spec.dim());
  for (std::size_t i = 0; i < values.size(); ++i) {
    spec.node(i, x);
    values[i] = f(x);
  }
  return GridDensity(spec, std::move(values));
}

namespace {

GridDensity normalized(GridDensity d) {
  const double m = d.mass();
  if (!(m > 0.0)) throw ValidationError("density has zero mass on the grid");
  for (double& v : d.values()) v /= m;
  return d;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

GridDensity GridDensity::gaussian_1d(const GridSpec& spec, double mean, double sd) {
  if (spec.dim() != 1) throw ValidationError("gaussian_1d needs a 1-D grid");
  if (!(sd > 0.0)) throw ValidationError("gaussian_1d needs sd > 0");
  const double h = spec.cell_width[0];
  std::vector<double> values(spec.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = spec.origin[0] + static_cast<double>(i) * h;
    // Difference of upper tails is accurate on both sides of the mean.
    const double za = (a - mean) / sd;
    const double zb = (a + h - mean) / sd;
    const double p = za >= 0.0 ? normal_cdf(-za) - normal_cdf(-zb) : normal_cdf(zb) - normal_cdf(za);
    values[i] = std::max(p, 0.0) / h;
  }
  return normalized(GridDensity(spec, std::move(values)));
}

GridDensity GridDensity::uniform_1d(const GridSpec& spec, double a, double b) {
  if (spec.dim() != 1) throw ValidationError("uniform_1d needs a 1-D grid");
  if (!(b > a)) throw ValidationError("uniform_1d needs a < b");
  const double h = spec.cell_width[0];
  std::vector<double> values(spec.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double lo = spec.origin[0] + static_cast<double>(i) * h;
    const double overlap = std::max(0.0, std::min(lo + h, b) - std::max(lo, a));
    values[i] = overlap / h;
  }
  return normalized(GridDensity(spec, std::move(values)));
}

double GridDensity::mass() const { return pairwise_sum(values_) * spec_.cell_volume(); }

double GridDensity::sup_norm() const {
  double s = 0.0;
  for (double v : values_) s = std::max(s, std::abs(v));
  return s;
}

double GridDensity::moment(double p) const {
  std::vector<double> x(spec_.dim());
  const double sum = pairwise_sum_of(values_.size(), [&](std::size_t i) {
    spec_.node(i, x);
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    return std::pow(std::sqrt(r2), p) * values_[i];
  });
  return sum * spec_.cell_volume();
}

double GridDensity::at(std::span<const double> x) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < spec_.dim(); ++a) {
    const double u = (x[a] - spec_.origin[a]) / spec_.cell_width[a];
    if (!(u >= 0.0) || u >= static_cast<double>(spec_.cells[a])) return 0.0;
    flat = flat * spec_.cells[a] + static_cast<std::size_t>(u);
  }
  return values_[flat];
}

GridDensity GridDensity::translated(double offset) const {
  GridSpec moved = spec_;
  moved.origin[0] += offset;
  return GridDensity(std::move(moved), values_);
}

void GridDensity::validate() const {
  spec_.validate();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
      throw ValidationError("grid density has a negative or non-finite value at node " +
                            std::to_string(i));
    }
  }
  if (mass() > 1.0 + 1e-6) throw ValidationError("grid density mass exceeds 1");
}

void write_grid_csv(std::ostream& out, const GridDensity& density) {
  const auto& spec = density.spec();
  for (std::size_t a = 0; a < spec.dim(); ++a) out << 'x' << a << ',';
  out << "value\n";
  std::vector<double> x(spec.dim());
  for (std::size_t i = 0; i < density.size(); ++i) {
    spec.node(i, x);
    for (double c : x) out << format_double(c) << ',';
    out << format_double(density[i]) << '\n';
  }
}

GridDensity read_grid_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("grid csv: empty input");
  const auto header = split_csv_record(line);
  if (header.size() < 2 || header.back() != "value") {
    throw ValidationError("grid csv: header must be x0,...,value");
  }
  const std::size_t dim = header.size() - 1;
  std::vector<std::vector<double>> coords;
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != dim + 1) {
      throw ValidationError("grid csv: row " + std::to_string(row) + " has wrong field count");
    }
    std::vector<double> x(dim);
    for (std::size_t a = 0; a < dim; ++a) x[a] = parse_double(fields[a]);
    coords.push_back(std::move(x));
    values.push_back(parse_double(fields[dim]));
  }
  if (values.empty()) throw ValidationError("grid csv: no rows");

  GridSpec spec;
  for (std::size_t a = 0; a < dim; ++a) {
    std::set<double> axis;
    for (const auto& x : coords) axis.insert(x[a]);
    const double first = *axis.begin();
    const double last = *axis.rbegin();
    const std::size_t n = axis.size();
    const double h = n > 1 ? (last - first) / static_cast<double>(n - 1) : 1.0;
    spec.origin.push_back(first - 0.5 * h);
    spec.cell_width.push_back(h);
    spec.cells.push_back(n);
  }
  if (spec.size() != values.size()) throw ValidationError("grid csv: rows do not form a full grid");
  // Rows are written in flat order; reorder defensively by computed index.
  std::vector<double> ordered(values.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double u = (coords[r][a] - spec.origin[a]) / spec.cell_width[a] - 0.5;
      flat = flat * spec.cells[a] + static_cast<std::size_t>(std::llround(u));
    }
    ordered[flat] = values[r];
  }
  return GridDensity(std::move(spec), std::move(ordered));
}

}  // namespace mckv
