#include "mckv/mollify.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "mckv/error.hpp"
#include "mckv/summation.hpp"

namespace mckv {

namespace {

double bump_mass(std::size_t dim) {
  // Radial integral times the surface area of the unit sphere in R^d.
  const double d = static_cast<double>(dim);
  const auto radial = [d](double r) { return BaseKernel::profile(r * r) * std::pow(r, d - 1.0); };
  double error = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(radial, 0.0, 1.0, 20, 1e-13, &error);
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / boost::math::tgamma(0.5 * d);
  return sphere * integral;
}

}  // namespace

BaseKernel BaseKernel::bump(std::size_t dim) {
  if (dim == 0) throw ValidationError("kernel dimension must be positive");
  static std::mutex mutex;
  static std::map<std::size_t, double> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(dim);
  if (it == cache.end()) it = cache.emplace(dim, 1.0 / bump_mass(dim)).first;
  return BaseKernel(dim, it->second);
}

double BaseKernel::operator()(std::span<const double> x) const {
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  return at_radius_squared(r2);
}

MollifierFamily::MollifierFamily(BaseKernel base, unsigned n) : base_(base), n_(n) {
  if (n == 0) throw ValidationError("mollifier index n must be positive");
  scale_ = std::pow(static_cast<double>(n), static_cast<double>(base_.dim()));
}

double mollifier_eval(const MollifierFamily& fam, std::span<const double> x) {
  if (x.size() != fam.dim()) throw ValidationError("mollifier_eval: point dimension mismatch");
  double d2 = 0.0;
  for (double c : x) d2 += c * c;
  return fam.at_distance_squared(d2);
}

KdeIndex::KdeIndex(const ParticleCloud& cloud, const MollifierFamily& fam)
    : fam_(fam), dim_(cloud.dim), count_(cloud.size()) {
  if (count_ == 0) throw ValidationError("kde: empty particle cloud");
  if (cloud.dim != fam.dim()) throw ValidationError("kde: cloud and kernel dimensions differ");

  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (dim_ == 1) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cloud.positions[a] < cloud.positions[b];
    });
    sorted_.reserve(count_);
    for (std::size_t k : order) sorted_.push_back(cloud.positions[k]);
    return;
  }

  std::vector<std::vector<long>> keys(count_);
  for (std::size_t i = 0; i < count_; ++i) keys[i] = cell_of(cloud.particle(i));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  sorted_.reserve(count_ * dim_);
  for (std::size_t pos = 0; pos < count_; ++pos) {
    const std::size_t k = order[pos];
    const auto x = cloud.particle(k);
    sorted_.insert(sorted_.end(), x.begin(), x.end());
    if (cell_keys_.empty() || cell_keys_.back() != keys[k]) {
      cell_keys_.push_back(keys[k]);
      cell_start_.push_back(pos);
    }
  }
  cell_start_.push_back(count_);
}

std::vector<long> KdeIndex::cell_of(std::span<const double> x) const {
  std::vector<long> key(dim_);
  const double n = static_cast<double>(fam_.n());
  for (std::size_t a = 0; a < dim_; ++a) key[a] = static_cast<long>(std::floor(x[a] * n));
  return key;
}

double KdeIndex::contribution(std::size_t k, std::span<const double> x) const {
  double d2 = 0.0;
  for (std::size_t a = 0; a < dim_; ++a) {
    const double diff = x[a] - sorted_[k * dim_ + a];
    d2 += diff * diff;
  }
  return fam_.at_distance_squared(d2);
}

double KdeIndex::at(std::span<const double> x) const {
  if (x.size() != dim_) throw ValidationError("kde: query dimension mismatch");
  double sum = 0.0;
  if (dim_ == 1) {
    // Slightly widened window: anything outside is certainly an exact zero.
    const double reach = fam_.radius() * (1.0 + 1e-12) + 1e-300;
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x[0] - reach);
    for (; it != sorted_.end() && *it <= x[0] + reach; ++it) {
      sum += contribution(static_cast<std::size_t>(it - sorted_.begin()), x);
    }
    return sum / static_cast<double>(count_);
  }

  // Neighbouring cells in lexicographic order keep the canonical summation order.
  const std::vector<long> centre = cell_of(x);
  std::vector<long> key(dim_);
  std::vector<int> offset(dim_, -1);
  for (;;) {
    for (std::size_t a = 0; a < dim_; ++a) key[a] = centre[a] + offset[a];
    const auto found = std::lower_bound(cell_keys_.begin(), cell_keys_.end(), key);
    if (found != cell_keys_.end() && *found == key) {
      const auto c = static_cast<std::size_t>(found - cell_keys_.begin());
      for (std::size_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) sum += contribution(k, x);
    }
    std::size_t a = dim_;
    while (a > 0 && offset[a - 1] == 1) offset[--a] = -1;
    if (a == 0) break;
    ++offset[a - 1];
  }
  return sum / static_cast<double>(count_);
}

double KdeIndex::at_unpruned(std::span<const double> x) const {
  if (x.size() != dim_) throw ValidationError("kde: query dimension mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < count_; ++k) sum += contribution(k, x);
  return sum / static_cast<double>(count_);
}

double kde_at(const ParticleCloud& cloud, const MollifierFamily& fam, std::span<const double> x) {
  return KdeIndex(cloud, fam).at(x);
}

BinnedKde::BinnedKde(std::span<const double> positions, const MollifierFamily& fam) {
  if (positions.empty()) throw ValidationError("kde: empty particle cloud");
  if (fam.dim() != 1) throw ValidationError("binned kde is one-dimensional");
  const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
  spacing_ = fam.radius() / kBinsPerRadius;
  origin_ = *lo - fam.radius() - spacing_;
  const auto nodes = static_cast<std::size_t>(std::ceil((*hi - origin_ + fam.radius()) / spacing_)) + 2;

  std::vector<double> bins(nodes, 0.0);
  for (double x : positions) {
    const double u = (x - origin_) / spacing_;
    const auto k = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(k);
    bins[k] += 1.0 - frac;
    bins[k + 1] += frac;
  }

  std::vector<double> taps(kBinsPerRadius + 1);
  for (int t = 0; t <= kBinsPerRadius; ++t) {
    const double r = t * spacing_;
    taps[static_cast<std::size_t>(t)] = fam.at_distance_squared(r * r);
  }
  const double inv_n = 1.0 / static_cast<double>(positions.size());
  values_.assign(nodes, 0.0);
  const auto reach = static_cast<std::ptrdiff_t>(kBinsPerRadius);
  const auto count = static_cast<std::ptrdiff_t>(nodes);
  for (std::ptrdiff_t j = 0; j < count; ++j) {
    double s = 0.0;
    const std::ptrdiff_t lo_t = std::max<std::ptrdiff_t>(-reach, j - (count - 1));
    const std::ptrdiff_t hi_t = std::min<std::ptrdiff_t>(reach, j);
    for (std::ptrdiff_t t = lo_t; t <= hi_t; ++t) {
      s += bins[static_cast<std::size_t>(j - t)] * taps[static_cast<std::size_t>(t < 0 ? -t : t)];
    }
    values_[static_cast<std::size_t>(j)] = s * inv_n;
  }
}

double BinnedKde::at(double x) const {
  const double u = (x - origin_) / spacing_;
  if (!(u >= 0.0) || u >= static_cast<double>(values_.size() - 1)) return 0.0;
  const auto k = static_cast<std::size_t>(u);
  const double frac = u - static_cast<double>(k);
  return values_[k] + frac * (values_[k + 1] - values_[k]);
}

GridDensity mollify_grid(const GridDensity& l, const MollifierFamily& fam) {
  const GridSpec& spec = l.spec();
  const std::size_t dim = spec.dim();
  if (dim != fam.dim()) throw ValidationError("mollify_grid: grid and kernel dimensions differ");
  for (std::size_t a = 0; a < dim; ++a) {
    if (!(spec.cell_width[a] < 0.5 * fam.radius())) {
      throw ValidationError("mollify_grid: cell width must be below 1/(2n) to resolve the kernel");
    }
  }

  // Stencil of node offsets within the kernel support.
  std::vector<long> reach(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    reach[a] = static_cast<long>(std::floor(fam.radius() / spec.cell_width[a]));
  }
  std::vector<std::vector<long>> offsets;
  std::vector<double> weights;
  std::vector<long> o(dim);
  for (std::size_t a = 0; a < dim; ++a) o[a] = -reach[a];
  for (;;) {
    double d2 = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double z = static_cast<double>(o[a]) * spec.cell_width[a];
      d2 += z * z;
    }
    const double w = fam.at_distance_squared(d2);
    if (w > 0.0) {
      offsets.push_back(o);
      weights.push_back(w);
    }
    std::size_t a = dim;
    while (a > 0 && o[a - 1] == reach[a - 1]) {
      o[a - 1] = -reach[a - 1];
      --a;
    }
    if (a == 0) break;
    ++o[a - 1];
  }
  const double total = pairwise_sum(weights);
  for (double& w : weights) w /= total;

  std::vector<double> out(l.size(), 0.0);
  std::vector<long> idx(dim);
  for (std::size_t flat = 0; flat < l.size(); ++flat) {
    std::size_t rest = flat;
    for (std::size_t a = dim; a-- > 0;) {
      idx[a] = static_cast<long>(rest % spec.cells[a]);
      rest /= spec.cells[a];
    }
    double s = 0.0;
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      std::size_t src = 0;
      bool inside = true;
      for (std::size_t a = 0; a < dim && inside; ++a) {
        const long j = idx[a] - offsets[k][a];
        inside = j >= 0 && j < static_cast<long>(spec.cells[a]);
        src = src * spec.cells[a] + static_cast<std::size_t>(j);
      }
      if (inside) s += weights[k] * l[src];
    }
    out[flat] = s;
  }
  return GridDensity(spec, std::move(out));
}

}  // namespace mckv
