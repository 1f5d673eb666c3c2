#pragma once

// Reference computations used as expected values in tests. They are written
// independently of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

inline double normal_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

/// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t panels = 2000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

/// min over permutations of the mean cost between two equal-size point sets.
inline double permutation_cost(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim,
                               double p) {
  const std::size_t n = x.size() / dim;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) r2 += std::pow(x[i * dim + k] - y[perm[i] * dim + k], 2);
      c += std::pow(std::sqrt(r2), p);
    }
    best = std::min(best, c / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Exhaustive LP over couplings of two 2-point measures: the coupling has a
/// single free parameter q = pi(x0, y0) on an interval, and the cost is linear
/// in q, so the optimum sits at an endpoint.
inline double two_point_cost(double x0, double x1, double a0, double y0, double y1, double b0, double p) {
  const double lo = std::max(0.0, a0 + b0 - 1.0);
  const double hi = std::min(a0, b0);
  auto cost = [&](double q) {
    const double q01 = a0 - q;
    const double q10 = b0 - q;
    const double q11 = 1.0 - a0 - b0 + q;
    return q * std::pow(std::abs(x0 - y0), p) + q01 * std::pow(std::abs(x0 - y1), p) +
           q10 * std::pow(std::abs(x1 - y0), p) + q11 * std::pow(std::abs(x1 - y1), p);
  };
  return std::min(cost(lo), cost(hi));
}

/// Sample variance with the n - 1 divisor (long double accumulation).
inline double sample_variance(const std::vector<double>& x) {
  long double m = 0.0L;
  for (double v : x) m += v;
  m /= static_cast<long double>(x.size());
  long double s = 0.0L;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(s / static_cast<long double>(x.size() - 1));
}

/// W_1 between an equal-weight sample and a law with CDF F, integrating
/// |F_n - F| by the sorted-sample formula with Simpson on each gap.
inline double w1_sample_to_cdf(std::vector<double> x, const std::function<double(double)>& F, double lo,
                               double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double total = oracle::simpson([&](double t) { return F(t); }, lo, x.front(), 200);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i + 1] == x[i]) continue;
    const double level = static_cast<double>(i + 1) / n;
    total += simpson([&](double t) { return std::abs(level - F(t)); }, x[i], x[i + 1], 20);
  }
  total += simpson([&](double t) { return 1.0 - F(t); }, x.back(), hi, 200);
  return total;
}

}  // namespace oracle
