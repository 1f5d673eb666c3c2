#include "mckv/transport.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/rng.hpp"
#include "mckv/summation.hpp"

namespace mckv {

namespace {

void require_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("Wasserstein order p must be >= 1");
}

double power_cost(double distance, double p) {
  if (p == 1.0) return distance;
  if (p == 2.0) return distance * distance;
  return std::pow(distance, p);
}

double root_of(double sum, double p) {
  if (sum < 1e-15) return 0.0;
  return p == 1.0 ? sum : std::pow(sum, 1.0 / p);
}

struct SortedAtoms {
  std::vector<double> x;
  std::vector<double> w;
};

SortedAtoms sorted_atoms(const DiscreteMeasure& m) {
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return m.points[a] < m.points[b] || (m.points[a] == m.points[b] && a < b);
  });
  SortedAtoms out;
  out.x.reserve(order.size());
  out.w.reserve(order.size());
  for (std::size_t k : order) {
    out.x.push_back(m.points[k]);
    out.w.push_back(m.weights[k]);
  }
  return out;
}

void require_1d(const DiscreteMeasure& m, const char* what) {
  m.validate();
  if (m.dim != 1) throw ValidationError(std::string(what) + ": measure must be one-dimensional");
}

}  // namespace

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  require_1d(mu, "wasserstein_1d");
  require_1d(nu, "wasserstein_1d");
  require_order(p);
  const SortedAtoms a = sorted_atoms(mu);
  const SortedAtoms b = sorted_atoms(nu);

  // Walk the merged CDF levels; each level segment is transported between the
  // atoms currently holding it.
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = a.w[0];
  double fb = b.w[0];
  double previous = 0.0;
  double sum = 0.0;
  for (;;) {
    const double level = std::min(fa, fb);
    if (level > previous) sum += (level - previous) * power_cost(std::abs(a.x[i] - b.x[j]), p);
    previous = std::max(previous, level);
    if (fa < fb) {
      if (++i == a.x.size()) break;
      fa += a.w[i];
    } else if (fb < fa) {
      if (++j == b.x.size()) break;
      fb += b.w[j];
    } else {
      if (++i == a.x.size() || ++j == b.x.size()) break;
      fa += a.w[i];
      fb += b.w[j];
    }
  }
  return root_of(sum, p);
}

double wasserstein_1d_samples(std::span<const double> a, std::span<const double> b, double p) {
  require_order(p);
  if (a.empty() || b.empty()) throw ValidationError("wasserstein_1d_samples: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const std::size_t na = x.size();
  const std::size_t nb = y.size();
  if (na == nb) {
    const double s = pairwise_sum_of(na, [&](std::size_t k) { return power_cost(std::abs(x[k] - y[k]), p); });
    return root_of(s / static_cast<double>(na), p);
  }
  // Levels k/na and l/nb compared exactly on the common denominator na * nb.
  const double denominator = static_cast<double>(na) * static_cast<double>(nb);
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t previous = 0;
  double sum = 0.0;
  while (i < na && j < nb) {
    const std::size_t ca = (i + 1) * nb;
    const std::size_t cb = (j + 1) * na;
    const std::size_t level = std::min(ca, cb);
    sum += static_cast<double>(level - previous) * power_cost(std::abs(x[i] - y[j]), p);
    previous = level;
    if (ca <= cb) ++i;
    if (cb <= ca) ++j;
  }
  return root_of(sum / denominator, p);
}

LpTransport wasserstein_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  mu.validate();
  nu.validate();
  require_order(p);
  if (mu.dim != nu.dim) throw ValidationError("wasserstein_lp: dimension mismatch");
  if (mu.size() > kMaxLpSupport || nu.size() > kMaxLpSupport) {
    throw ValidationError("wasserstein_lp: supports are limited to " +
                          std::to_string(kMaxLpSupport) + " atoms (got " +
                          std::to_string(mu.size()) + " and " + std::to_string(nu.size()) + ")");
  }

  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < mu.size(); ++i) if (mu.weights[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < nu.size(); ++j) if (nu.weights[j] > 0.0) cols.push_back(j);

  std::vector<double> a(rows.size());
  std::vector<double> b(cols.size());
  for (std::size_t k = 0; k < rows.size(); ++k) a[k] = mu.weights[rows[k]];
  for (std::size_t k = 0; k < cols.size(); ++k) b[k] = nu.weights[cols[k]];
  // Totals agree to 1e-12 after validation; put the discrepancy on the last demand.
  b.back() = std::max(0.0, b.back() + (pairwise_sum(a) - pairwise_sum(b)));

  std::vector<double> cost(rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto x = mu.point(rows[r]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto y = nu.point(cols[c]);
      double d2 = 0.0;
      for (std::size_t k = 0; k < mu.dim; ++k) d2 += (x[k] - y[k]) * (x[k] - y[k]);
      cost[r * cols.size() + c] = power_cost(std::sqrt(d2), p);
    }
  }

  const auto solved = detail::solve_transportation(a, b, cost);
  LpTransport out;
  out.plan.rows = mu.size();
  out.plan.cols = nu.size();
  out.plan.mass.assign(mu.size() * nu.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.plan.mass[rows[r] * nu.size() + cols[c]] = solved.flow[r * cols.size() + c];
    }
  }
  out.value = root_of(solved.cost, p);
  return out;
}

double kantorovich_dual_value(const TestFunction& f, const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu) {
  mu.validate();
  nu.validate();
  if (mu.dim != nu.dim) throw ValidationError("kantorovich_dual_value: dimension mismatch");
  if (!f.f) throw ValidationError("kantorovich_dual_value: empty test function");
  if (!(f.lipschitz >= 0.0) || f.lipschitz > 1.0) {
    throw ValidationError("kantorovich_dual_value: declared Lipschitz constant must be in [0, 1]");
  }

  const std::size_t dim = mu.dim;
  std::vector<double> points(mu.points);
  points.insert(points.end(), nu.points.begin(), nu.points.end());
  const std::size_t count = points.size() / dim;
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    values[k] = f.f(std::span<const double>(points.data() + k * dim, dim));
    if (!std::isfinite(values[k])) throw ValidationError("kantorovich_dual_value: f is not finite on the support");
  }
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t l = k + 1; l < count; ++l) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = points[k * dim + c] - points[l * dim + c];
        d2 += diff * diff;
      }
      const double slack = 1e-12 * (1.0 + std::abs(values[k]) + std::abs(values[l]));
      if (std::abs(values[k] - values[l]) > f.lipschitz * std::sqrt(d2) + slack) {
        throw ValidationError("kantorovich_dual_value: test function violates its Lipschitz bound "
                              "between support points " + std::to_string(k) + " and " +
                              std::to_string(l));
      }
    }
  }
  const double plus = pairwise_sum_of(mu.size(), [&](std::size_t i) { return mu.weights[i] * values[i]; });
  const double minus =
      pairwise_sum_of(nu.size(), [&](std::size_t j) { return nu.weights[j] * values[mu.size() + j]; });
  return plus - minus;
}

WeightedTv weighted_tv(const GridDensity& l1, const GridDensity& l2, double p) {
  if (!l1.spec().same_as(l2.spec())) throw ValidationError("weighted_tv: densities live on different grids");
  if (!(p >= 0.0)) throw ValidationError("weighted_tv: p must be >= 0");
  const auto& spec = l1.spec();
  const double volume = spec.cell_volume();
  std::vector<double> x(spec.dim());
  std::vector<double> moment_terms(l1.size());
  for (std::size_t i = 0; i < l1.size(); ++i) {
    spec.node(i, x);
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    moment_terms[i] = std::pow(std::sqrt(r2), p) * std::abs(l1[i] - l2[i]);
  }
  WeightedTv out;
  out.unweighted = pairwise_sum_of(l1.size(), [&](std::size_t i) { return std::abs(l1[i] - l2[i]); }) * volume;
  out.moment = pairwise_sum(moment_terms) * volume;
  out.total = out.unweighted + out.moment;
  return out;
}

namespace {

// Integral of |c - G| over [a, b] where G is the N(mean, sd^2) CDF.
class NormalCdfIntegral {
 public:
  NormalCdfIntegral(double mean, double sd) : mean_(mean), sd_(sd), law_(mean, sd) {}

  // Antiderivative of G with A(-inf) = 0.
  double antiderivative(double x) const {
    const double z = (x - mean_) / sd_;
    return (x - mean_) * cdf(z) + sd_ * pdf(z);
  }

  // Integral of 1 - G over [x, inf).
  double upper_tail(double x) const {
    const double z = (x - mean_) / sd_;
    return sd_ * pdf(z) - (x - mean_) * cdf(-z);
  }

  double between(double a, double b, double c) const {
    if (!(b > a)) return 0.0;
    const double q = c <= 0.0 ? -INFINITY : (c >= 1.0 ? INFINITY : boost::math::quantile(law_, c));
    auto signed_part = [&](double lo, double hi) {
      return (antiderivative(hi) - antiderivative(lo)) - c * (hi - lo);
    };
    if (q <= a) return signed_part(a, b);
    if (q >= b) return -signed_part(a, b);
    return -signed_part(a, q) + signed_part(q, b);
  }

 private:
  static double cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
  static double pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

  double mean_;
  double sd_;
  boost::math::normal_distribution<double> law_;
};

double w1_to_normal_sorted(std::span<const double> x, std::span<const double> cumulative, double mean,
                           double sd) {
  if (!(sd > 0.0)) throw ValidationError("wasserstein1_to_normal: sd must be positive");
  const NormalCdfIntegral g(mean, sd);
  const std::size_t n = x.size();
  std::vector<double> pieces(n + 1);
  pieces[0] = g.antiderivative(x[0]);
  for (std::size_t k = 0; k + 1 < n; ++k) pieces[k + 1] = g.between(x[k], x[k + 1], cumulative[k]);
  pieces[n] = g.upper_tail(x[n - 1]);
  return pairwise_sum(pieces);
}

}  // namespace

double wasserstein1_to_normal(const DiscreteMeasure& mu, double mean, double sd) {
  require_1d(mu, "wasserstein1_to_normal");
  const SortedAtoms a = sorted_atoms(mu);
  std::vector<double> cumulative(a.w.size());
  std::partial_sum(a.w.begin(), a.w.end(), cumulative.begin());
  return w1_to_normal_sorted(a.x, cumulative, mean, sd);
}

double wasserstein1_to_normal(std::span<const double> samples, double mean, double sd) {
  if (samples.empty()) throw ValidationError("wasserstein1_to_normal: empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  std::vector<double> cumulative(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) cumulative[k] = static_cast<double>(k + 1) / n;
  return w1_to_normal_sorted(x, cumulative, mean, sd);
}

namespace {

// Integral over an interval of length len of |d| where d is linear from d0 to d1.
double abs_linear_integral(double d0, double d1, double len) {
  if ((d0 >= 0.0 && d1 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0)) return 0.5 * len * std::abs(d0 + d1);
  return 0.5 * len * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
}

// Piecewise-linear CDF of a normalized 1-D grid density.
class GridCdf {
 public:
  explicit GridCdf(const GridDensity& density) : spec_(density.spec()) {
    if (spec_.dim() != 1) throw ValidationError("grid CDF: density must be one-dimensional");
    const std::size_t m = density.size();
    const double total = pairwise_sum(density.values());
    if (!(total > 0.0)) throw ValidationError("grid CDF: density has zero mass");
    cumulative_.assign(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) cumulative_[k + 1] = cumulative_[k] + density[k] / total;
    cumulative_[m] = 1.0;
  }

  double edge(std::size_t k) const { return spec_.origin[0] + static_cast<double>(k) * spec_.cell_width[0]; }
  std::size_t edges() const { return cumulative_.size(); }
  double at_edge(std::size_t k) const { return cumulative_[k]; }

  double operator()(double x) const {
    const double u = (x - spec_.origin[0]) / spec_.cell_width[0];
    if (u <= 0.0) return 0.0;
    const std::size_t m = cumulative_.size() - 1;
    if (u >= static_cast<double>(m)) return 1.0;
    const auto k = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(k);
    return cumulative_[k] + frac * (cumulative_[k + 1] - cumulative_[k]);
  }

 private:
  GridSpec spec_;
  std::vector<double> cumulative_;
};

double w1_to_grid_sorted(std::span<const double> x, std::span<const double> cumulative,
                         const GridDensity& density) {
  const GridCdf g(density);
  std::vector<double> breaks(x.begin(), x.end());
  for (std::size_t k = 0; k < g.edges(); ++k) breaks.push_back(g.edge(k));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  std::vector<double> pieces(breaks.size());
  std::size_t atom = 0;
  double level = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    while (atom < x.size() && x[atom] <= breaks[k]) level = cumulative[atom++];
    pieces[k] = abs_linear_integral(g(breaks[k]) - level, g(breaks[k + 1]) - level,
                                    breaks[k + 1] - breaks[k]);
  }
  return pairwise_sum(pieces);
}

}  // namespace

double wasserstein1_to_grid(const DiscreteMeasure& mu, const GridDensity& density) {
  require_1d(mu, "wasserstein1_to_grid");
  const SortedAtoms a = sorted_atoms(mu);
  std::vector<double> cumulative(a.w.size());
  std::partial_sum(a.w.begin(), a.w.end(), cumulative.begin());
  return w1_to_grid_sorted(a.x, cumulative, density);
}

double wasserstein1_to_grid(std::span<const double> samples, const GridDensity& density) {
  if (samples.empty()) throw ValidationError("wasserstein1_to_grid: empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  std::vector<double> cumulative(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) cumulative[k] = static_cast<double>(k + 1) / n;
  return w1_to_grid_sorted(x, cumulative, density);
}

double wasserstein1_grid(const GridDensity& a, const GridDensity& b) {
  if (!a.spec().same_as(b.spec())) throw ValidationError("wasserstein1_grid: densities live on different grids");
  const GridCdf ga(a);
  const GridCdf gb(b);
  const double h = a.spec().cell_width[0];
  return pairwise_sum_of(ga.edges() - 1, [&](std::size_t k) {
    return abs_linear_integral(ga.at_edge(k) - gb.at_edge(k), ga.at_edge(k + 1) - gb.at_edge(k + 1), h);
  });
}

namespace {

DiscreteMeasure resample(const DiscreteMeasure& m, std::size_t size, std::uint64_t seed,
                         std::uint64_t stream) {
  std::vector<double> cumulative(m.size());
  std::partial_sum(m.weights.begin(), m.weights.end(), cumulative.begin());
  const double total = cumulative.back();
  const CounterStream rng(seed, stream, StreamPurpose::kSubsample);
  DiscreteMeasure out;
  out.dim = m.dim;
  out.points.reserve(size * m.dim);
  for (std::size_t k = 0; k < size; ++k) {
    const double u = rng.uniforms(k)[0] * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), m.size() - 1);
    const auto x = m.point(idx);
    out.points.insert(out.points.end(), x.begin(), x.end());
  }
  out.weights.assign(size, 1.0 / static_cast<double>(size));
  return out;
}

}  // namespace

SubsampledDistance wasserstein_subsampled(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                          double p, std::uint64_t seed, std::size_t size) {
  mu.validate();
  nu.validate();
  require_order(p);
  if (mu.dim != nu.dim) throw ValidationError("wasserstein_subsampled: dimension mismatch");
  if (size == 0 || size > kMaxLpSupport) {
    throw ValidationError("wasserstein_subsampled: subsample size must be in [1, 512]");
  }
  SubsampledDistance out;
  if (mu.size() <= size && nu.size() <= size) {
    out.value = mu.dim == 1 ? wasserstein_1d(mu, nu, p) : wasserstein_lp(mu, nu, p).value;
    out.subsample_size = std::max(mu.size(), nu.size());
    out.exact = true;
    return out;
  }
  const bool cut_mu = mu.size() > size;
  const bool cut_nu = nu.size() > size;
  const DiscreteMeasure mu1 = cut_mu ? resample(mu, size, seed, 0) : mu;
  const DiscreteMeasure nu1 = cut_nu ? resample(nu, size, seed, 1) : nu;
  out.value = wasserstein_lp(mu1, nu1, p).value;
  double bias = 0.0;
  if (cut_mu) bias += wasserstein_lp(mu1, resample(mu, size, seed, 2), p).value;
  if (cut_nu) bias += wasserstein_lp(nu1, resample(nu, size, seed, 3), p).value;
  out.bias = 0.5 * bias;
  out.subsample_size = size;
  return out;
}

}  // namespace mckv
