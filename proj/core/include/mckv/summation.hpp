#pragma once

#include <cstddef>
#include <span>

namespace mckv {

/// Pairwise (cascade) summation over a fixed binary tree of the index range.
/// The tree depends only on the number of terms, so the result is
/// bit-reproducible regardless of how callers parallelize around it.
template <class Term>
double pairwise_sum_of(std::size_t begin, std::size_t end, const Term& term) {
  constexpr std::size_t kLeaf = 32;
  if (end - begin <= kLeaf) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum_of(begin, mid, term) + pairwise_sum_of(mid, end, term);
}

template <class Term>
double pairwise_sum_of(std::size_t n, const Term& term) {
  return pairwise_sum_of(std::size_t{0}, n, term);
}

inline double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_of(values.size(), [&](std::size_t i) { return values[i]; });
}

}  // namespace mckv
