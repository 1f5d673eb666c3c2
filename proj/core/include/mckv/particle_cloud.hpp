#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mckv {

/// N particle positions in R^d at one time: the empirical proxy for the law.
struct ParticleCloud {
  std::size_t dim = 1;
  std::vector<double> positions;  ///< size() * dim, row-major
  double time = 0.0;

  std::size_t size() const { return dim == 0 ? 0 : positions.size() / dim; }
  std::span<const double> particle(std::size_t i) const {
    return {positions.data() + i * dim, dim};
  }
  std::span<double> particle(std::size_t i) { return {positions.data() + i * dim, dim}; }

  /// At least one particle, every coordinate finite.
  void validate() const;
};

}  // namespace mckv
