#include <algorithm>
#include <cmath>
#include <numeric>

#include "app.hpp"
#include "mckv/measure.hpp"
#include "mckv/rng.hpp"
#include "mckv/transport.hpp"

namespace mckv::app {

namespace {

class Draws {
 public:
  Draws(std::uint64_t seed, std::uint64_t stream) : stream_(seed, stream, StreamPurpose::kFixture) {}
  double uniform() {
    if (slot_ == 2) {
      buffer_ = stream_.uniforms(index_++);
      slot_ = 0;
    }
    return buffer_[slot_++];
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return lo + std::min(hi - lo, static_cast<std::size_t>(uniform() * static_cast<double>(hi - lo + 1)));
  }

 private:
  CounterStream stream_;
  std::uint64_t index_ = 0;
  std::array<double, 2> buffer_{};
  int slot_ = 2;
};

DiscreteMeasure random_measure(Draws& d, std::size_t size, std::size_t dim) {
  DiscreteMeasure m;
  m.dim = dim;
  for (std::size_t i = 0; i < size * dim; ++i) m.points.push_back(d.uniform(-3.0, 3.0));
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    m.weights.push_back(d.uniform(0.05, 1.0));
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  return m;
}

// Equal-weight transport cost by enumerating all permutations.
double permutation_wp(const std::vector<double>& x, const std::vector<double>& y, std::size_t dim, double p) {
  const std::size_t n = x.size() / dim;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = x[i * dim + k] - y[perm[i] * dim + k];
        r2 += diff * diff;
      }
      cost += std::pow(std::sqrt(r2), p);
    }
    best = std::min(best, cost / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best, 1.0 / p);
}

}  // namespace

nlohmann::json transport_selftest(std::uint64_t seed) {
  nlohmann::json report;
  bool pass = true;

  {
    double worst = 0.0;
    for (std::size_t c = 0; c < 100; ++c) {
      Draws d(seed, c);
      const double p = c % 2 == 0 ? 1.0 : 2.0;
      const auto mu = random_measure(d, d.integer(1, 40), 1);
      const auto nu = random_measure(d, d.integer(1, 40), 1);
      worst = std::max(worst, std::abs(wasserstein_1d(mu, nu, p) - wasserstein_lp(mu, nu, p).value));
    }
    const bool ok = worst <= 1e-9;
    pass = pass && ok;
    report["quantile_vs_lp"] = {{"cases", 100}, {"max_abs_error", worst}, {"tolerance", 1e-9}, {"pass", ok}};
  }

  {
    double worst = 0.0;
    for (std::size_t c = 0; c < 40; ++c) {
      Draws d(seed, 1000 + c);
      const std::size_t n = d.integer(1, 6);
      const std::size_t dim = 1 + c % 3;
      const double p = c % 2 == 0 ? 1.0 : 2.0;
      std::vector<double> x(n * dim), y(n * dim);
      for (double& v : x) v = d.uniform(-2.0, 2.0);
      for (double& v : y) v = d.uniform(-2.0, 2.0);
      const double lp = wasserstein_lp(DiscreteMeasure::uniform(x, dim), DiscreteMeasure::uniform(y, dim), p).value;
      worst = std::max(worst, std::abs(lp - permutation_wp(x, y, dim, p)));
    }
    const bool ok = worst <= 1e-9;
    pass = pass && ok;
    report["lp_vs_permutations"] = {{"cases", 40}, {"max_abs_error", worst}, {"tolerance", 1e-9}, {"pass", ok}};
  }

  {
    double worst = 0.0;
    const TestFunction plus{[](std::span<const double> x) { return x[0]; }, 1.0};
    const TestFunction minus{[](std::span<const double> x) { return -x[0]; }, 1.0};
    for (std::size_t c = 0; c < 50; ++c) {
      Draws d(seed, 2000 + c);
      DiscreteMeasure mu;
      DiscreteMeasure nu;
      if (c % 2 == 0) {
        const double a = d.uniform(-5.0, 5.0);
        mu = DiscreteMeasure::uniform({a});
        nu = DiscreteMeasure::uniform({a + d.uniform(-3.0, 3.0)});
      } else {
        // Two-point measure and its shift: the monotone coupling moves all mass by the shift.
        const double a = d.uniform(-3.0, 0.0);
        const double b = a + d.uniform(0.1, 3.0);
        const double w = d.uniform(0.1, 0.9);
        const double s = d.uniform(-2.0, 2.0);
        mu = DiscreteMeasure{1, {a, b}, {w, 1.0 - w}};
        nu = DiscreteMeasure{1, {a + s, b + s}, {w, 1.0 - w}};
      }
      const double dual =
          std::max(kantorovich_dual_value(plus, mu, nu), kantorovich_dual_value(minus, mu, nu));
      worst = std::max(worst, std::abs(dual - wasserstein_1d(mu, nu, 1.0)));
    }
    const bool ok = worst <= 1e-9;
    pass = pass && ok;
    report["duality"] = {{"cases", 50}, {"max_abs_error", worst}, {"tolerance", 1e-9}, {"pass", ok}};
  }

  {
    bool symmetric = true;
    for (std::size_t c = 0; c < 50; ++c) {
      Draws d(seed, 3000 + c);
      const auto mu = random_measure(d, d.integer(1, 30), 1);
      const auto nu = random_measure(d, d.integer(1, 30), 1);
      symmetric = symmetric && wasserstein_1d(mu, nu, 1.5) == wasserstein_1d(nu, mu, 1.5);
    }
    pass = pass && symmetric;
    report["symmetry"] = {{"cases", 50}, {"pass", symmetric}};
  }

  report["seed"] = seed;
  report["pass"] = pass;
  return report;
}

}  // namespace mckv::app
