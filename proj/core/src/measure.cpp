#include "mckv/measure.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "mckv/error.hpp"
#include "mckv/grid.hpp"
#include "mckv/io.hpp"
#include "mckv/summation.hpp"

namespace mckv {

DiscreteMeasure DiscreteMeasure::uniform(std::vector<double> points, std::size_t dim) {
  if (dim == 0 || points.size() % dim != 0 || points.empty()) {
    throw ValidationError("uniform measure: point array does not match dimension");
  }
  const std::size_t n = points.size() / dim;
  return DiscreteMeasure{dim, std::move(points),
                         std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

DiscreteMeasure DiscreteMeasure::from_grid(const GridDensity& density) {
  const auto& spec = density.spec();
  DiscreteMeasure m;
  m.dim = spec.dim();
  m.points.resize(density.size() * m.dim);
  m.weights.resize(density.size());
  const double total = pairwise_sum(density.values());
  if (!(total > 0.0)) throw ValidationError("from_grid: density has zero mass");
  for (std::size_t i = 0; i < density.size(); ++i) {
    spec.node(i, std::span<double>(m.points.data() + i * m.dim, m.dim));
    m.weights[i] = density[i] / total;
  }
  return m;
}

std::vector<double> DiscreteMeasure::mean() const {
  std::vector<double> out(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    out[a] = pairwise_sum_of(size(), [&](std::size_t i) { return weights[i] * points[i * dim + a]; });
  }
  return out;
}

void DiscreteMeasure::validate() const {
  if (dim == 0) throw ValidationError("measure dimension must be positive");
  if (weights.empty()) throw ValidationError("measure has no atoms");
  if (points.size() != weights.size() * dim) {
    throw ValidationError("measure points and weights have different lengths");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) {
      throw ValidationError("measure weight " + std::to_string(i) + " is negative");
    }
  }
  for (double x : points) {
    if (!std::isfinite(x)) throw ValidationError("measure has a non-finite coordinate");
  }
  const double total = pairwise_sum(weights);
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("measure weights sum to " + format_double(total) + ", not 1");
  }
}

double TransportPlan::marginal_error(const DiscreteMeasure& source,
                                     const DiscreteMeasure& target) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double s = pairwise_sum_of(cols, [&](std::size_t j) { return (*this)(i, j); });
    worst = std::max(worst, std::abs(s - source.weights[i]));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    const double s = pairwise_sum_of(rows, [&](std::size_t i) { return (*this)(i, j); });
    worst = std::max(worst, std::abs(s - target.weights[j]));
  }
  return worst;
}

void write_measure_csv(std::ostream& out, const DiscreteMeasure& measure) {
  for (std::size_t a = 0; a < measure.dim; ++a) out << 'x' << a << ',';
  out << "weight\n";
  for (std::size_t i = 0; i < measure.size(); ++i) {
    for (double c : measure.point(i)) out << format_double(c) << ',';
    out << format_double(measure.weights[i]) << '\n';
  }
}

DiscreteMeasure read_measure_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("measure csv: empty input");
  const auto header = split_csv_record(line);
  if (header.size() < 2 || header.back() != "weight") {
    throw ValidationError("measure csv: header must be x0,...,weight");
  }
  DiscreteMeasure m;
  m.dim = header.size() - 1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != m.dim + 1) {
      throw ValidationError("measure csv: row " + std::to_string(row) + " has wrong field count");
    }
    for (std::size_t a = 0; a < m.dim; ++a) m.points.push_back(parse_double(fields[a]));
    m.weights.push_back(parse_double(fields[m.dim]));
  }
  m.validate();
  return m;
}

}  // namespace mckv
