#include "mckv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mckv/error.hpp"
#include "mckv/io.hpp"
#include "mckv/summation.hpp"
#include "mckv/transport.hpp"

namespace mckv {

nlohmann::json EstimateReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["fitted_constant"] = fitted_constant;
  j["exponent_fit"] = exponent_fit ? nlohmann::json(*exponent_fit) : nlohmann::json(nullptr);
  j["pass"] = pass;
  j["degenerate"] = degenerate;
  j["samples"] = samples;
  j["details"] = details;
  return j;
}

SnapshotDensity density_snapshot(const ParticleCloud& cloud, const MollifierFamily& fam, const GridSpec& grid) {
  grid.validate();
  if (grid.dim() != cloud.dim) throw ValidationError("density_snapshot: grid and cloud dimensions differ");
  for (std::size_t a = 0; a < grid.dim(); ++a) {
    if (!(grid.cell_width[a] < 0.5 * fam.radius())) {
      throw ValidationError("density_snapshot: grid cell width must be below 1/(2n) to resolve the kernel");
    }
  }
  const KdeIndex kde(cloud, fam);
  std::vector<double> values(grid.size());
#pragma omp parallel
  {
    std::vector<double> x(grid.dim());
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(values.size()); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      grid.node(i, x);
      values[i] = kde.at(x);
    }
  }
  SnapshotDensity out{GridDensity(grid, std::move(values)), 0.0};
  out.off_grid_mass = 1.0 - out.density.mass();
  return out;
}

namespace {

// k with gap == horizon * 2^{-k} (relative tolerance 1e-9), if any.
std::optional<int> dyadic_level(double gap, double horizon) {
  if (!(gap > 0.0) || !(horizon > 0.0)) return std::nullopt;
  const double k = std::log2(horizon / gap);
  const double rounded = std::round(k);
  if (rounded < 0.0 || std::abs(gap - horizon * std::exp2(-rounded)) > 1e-9 * gap) return std::nullopt;
  return static_cast<int>(rounded);
}

}  // namespace

EstimateReport holder_time_fit(std::span<const double> times, double horizon,
                               const std::function<double(std::size_t, std::size_t)>& distance,
                               const HolderFitOptions& options) {
  EstimateReport report;
  report.name = "holder_time_fit";
  const double cutoff = options.min_time_fraction * horizon;

  std::vector<HolderPair> pairs;
  std::map<int, int> levels;
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      const double s = std::min(times[i], times[j]);
      const double t = std::max(times[i], times[j]);
      if (s < cutoff * (1.0 - 1e-12)) continue;
      const auto level = dyadic_level(t - s, horizon);
      if (!level) continue;
      pairs.push_back({s, t, distance(i, j)});
      ++levels[*level];
    }
  }
  if (levels.size() < 3) {
    throw ValidationError("holder_time_fit: need at least 3 distinct dyadic gaps among snapshots with t >= " +
                          format_double(cutoff) + " (found " + std::to_string(levels.size()) + ")");
  }

  auto& rows = report.samples["pairs"] = nlohmann::json::array();
  bool degenerate = false;
  for (const auto& p : pairs) {
    rows.push_back({{"s", p.s}, {"t", p.t}, {"gap", p.t - p.s}, {"distance", p.distance}});
    degenerate = degenerate || !(p.distance > options.zero_distance);
  }
  report.details["distinct_gaps"] = levels.size();
  report.details["min_time"] = cutoff;
  if (degenerate) {
    report.degenerate = true;
    report.pass = false;
    report.details["reason"] = "zero Wasserstein distance between snapshots; log-log fit undefined";
    return report;
  }

  const std::size_t n = pairs.size();
  const double mx = pairwise_sum_of(n, [&](std::size_t k) { return std::log(pairs[k].t - pairs[k].s); }) / n;
  const double my = pairwise_sum_of(n, [&](std::size_t k) { return std::log(pairs[k].distance); }) / n;
  const double sxy = pairwise_sum_of(n, [&](std::size_t k) {
    return (std::log(pairs[k].t - pairs[k].s) - mx) * (std::log(pairs[k].distance) - my);
  });
  const double sxx = pairwise_sum_of(n, [&](std::size_t k) {
    const double dx = std::log(pairs[k].t - pairs[k].s) - mx;
    return dx * dx;
  });
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  report.exponent_fit = slope;
  report.fitted_constant = std::exp(intercept);
  report.details["intercept_log"] = intercept;
  report.pass = slope >= options.pass_slope;
  return report;
}

EstimateReport holder_time_fit(const TrajectoryStore& store, double p, const HolderFitOptions& options) {
  if (store.snapshots.size() < 2) throw ValidationError("holder_time_fit: store has fewer than two snapshots");
  if (store.dim != 1) throw ValidationError("holder_time_fit: exact W_p needs one-dimensional snapshots");
  std::vector<double> times;
  for (const auto& s : store.snapshots) times.push_back(s.time);
  const double horizon = times.back();
  auto report = holder_time_fit(times, horizon, [&](std::size_t i, std::size_t j) {
    return wasserstein_1d_samples(store.snapshots[i].cloud.positions, store.snapshots[j].cloud.positions, p);
  }, options);
  report.samples["p"] = p;
  report.samples["snapshots"] = times;
  report.samples["store_hash"] = store.content_hash();
  return report;
}

EstimateReport tail_and_moments(const ParticleCloud& cloud, double p, std::span<const double> radii) {
  cloud.validate();
  if (!(p >= 0.0)) throw ValidationError("tail_and_moments: p must be >= 0");
  const std::size_t n = cloud.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (double c : cloud.particle(i)) r2 += c * c;
    norms[i] = std::sqrt(r2);
  }
  const auto powered = [&](std::size_t i) { return std::pow(norms[i], p); };
  const double moment = pairwise_sum_of(n, powered) / static_cast<double>(n);

  std::vector<double> sorted_radii(radii.begin(), radii.end());
  std::sort(sorted_radii.begin(), sorted_radii.end());
  EstimateReport report;
  report.name = "tail_and_moments";
  report.fitted_constant = moment;
  report.details["p"] = p;
  report.details["moment"] = moment;
  auto& tails = report.details["tails"] = nlohmann::json::array();
  bool monotone = true;
  double previous = INFINITY;
  for (double R : sorted_radii) {
    const double tail =
        pairwise_sum_of(n, [&](std::size_t i) { return norms[i] > R ? powered(i) : 0.0; }) / static_cast<double>(n);
    tails.push_back({{"R", R}, {"tail", tail}});
    monotone = monotone && tail <= previous;
    previous = tail;
  }
  report.pass = monotone;
  report.samples["particles"] = n;
  return report;
}

KrylovEstimate krylov_functional(const TrajectoryStore& store,
                                 const std::function<double(double, std::span<const double>)>& g, int j) {
  if (!store.has_dense()) throw ValidationError("krylov_functional: store has no dense paths");
  if (j < 1) throw ValidationError("krylov_functional: j must be >= 1");
  const std::size_t steps = store.dense_times.size();
  if (steps < 2) throw ValidationError("krylov_functional: need at least one step");
  const std::size_t n = store.particles;
  const std::size_t d = store.dim;
  std::vector<double> values(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      const double s = store.dense_times[k];
      const auto path = store.dense_step(k);
      integral += g(s, path.subspan(i * d, d)) * (store.dense_times[k + 1] - s);
    }
    values[i] = std::pow(integral, j);
  }
  KrylovEstimate out;
  out.paths = n;
  out.value = pairwise_sum(values) / static_cast<double>(n);
  if (n > 1) {
    const double var = pairwise_sum_of(n, [&](std::size_t i) {
                         const double dv = values[i] - out.value;
                         return dv * dv;
                       }) / static_cast<double>(n - 1);
    out.standard_error = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

double mc_noise_floor_w1(std::span<const double> samples) {
  if (samples.size() < 2) throw ValidationError("mc_noise_floor_w1: need at least two samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  const double integral = pairwise_sum_of(x.size() - 1, [&](std::size_t k) {
    const double f = static_cast<double>(k + 1) / n;
    return std::sqrt(f * (1.0 - f)) * (x[k + 1] - x[k]);
  });
  return std::numbers::sqrt2 * std::sqrt(2.0 / std::numbers::pi) * integral / std::sqrt(n);
}

}  // namespace mckv
