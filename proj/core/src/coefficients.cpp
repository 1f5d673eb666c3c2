#include "mckv/coefficients.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mckv/error.hpp"
#include "mckv/io.hpp"
#include "mckv/rng.hpp"
#include "mckv/summation.hpp"
#include "mckv/transport.hpp"

namespace mckv {

MeasureView::MeasureView(std::size_t dim, std::span<const double> points, std::span<const double> weights)
    : dim_(dim), points_(points), weights_(weights), mean_(dim, 0.0) {
  if (dim == 0 || points.size() % dim != 0 || points.empty()) {
    throw ValidationError("measure view: point array does not match dimension");
  }
  if (!weights.empty() && weights.size() != size()) {
    throw ValidationError("measure view: weights and points differ in length");
  }
  for (std::size_t a = 0; a < dim; ++a) {
    if (weights.empty()) {
      mean_[a] = pairwise_sum_of(size(), [&](std::size_t i) { return points[i * dim + a]; }) /
                 static_cast<double>(size());
    } else {
      mean_[a] = pairwise_sum_of(size(), [&](std::size_t i) { return weights[i] * points[i * dim + a]; });
    }
  }
}

namespace {

nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double frobenius(std::span<const double> m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

// Frobenius norm of (sigma sigma^T)^{-1}; infinity when singular.
double inverse_diffusion_norm(std::span<const double> sigma, std::size_t d, std::size_t m) {
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < m; ++k) a[i * d + j] += sigma[i * m + k] * sigma[j * m + k];
  std::vector<double> inv(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) inv[i * d + i] = 1.0;
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(a[r * d + col]) > std::abs(a[pivot * d + col])) pivot = r;
    if (!(std::abs(a[pivot * d + col]) > 1e-14 * scale) || scale == 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    for (std::size_t k = 0; k < d; ++k) {
      std::swap(a[col * d + k], a[pivot * d + k]);
      std::swap(inv[col * d + k], inv[pivot * d + k]);
    }
    const double diag = a[col * d + col];
    for (std::size_t k = 0; k < d; ++k) {
      a[col * d + k] /= diag;
      inv[col * d + k] /= diag;
    }
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a[r * d + col];
      for (std::size_t k = 0; k < d; ++k) {
        a[r * d + k] -= f * a[col * d + k];
        inv[r * d + k] -= f * inv[col * d + k];
      }
    }
  }
  return frobenius(inv);
}

std::size_t scenario_dim(const nlohmann::json& parameters) {
  const auto d = parameters.value("dim", 1);
  if (d < 1 || d > 16) throw ValidationError("scenario parameter dim must be in [1, 16]");
  return static_cast<std::size_t>(d);
}

DiffusionFn scaled_identity(std::size_t d, double s) {
  return [d, s](double, std::span<const double>, const MeasureView&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i * d + i] = s;
  };
}

}  // namespace

nlohmann::json CoefficientSet::descriptor() const {
  nlohmann::json j;
  j["name"] = name;
  j["parameters"] = parameters;
  j["dim"] = dim;
  j["noise_dim"] = noise_dim;
  j["constants"] = {{"C", finite_or_string(constants.C)},
                    {"beta", constants.beta},
                    {"p", constants.p},
                    {"f0_bound", finite_or_string(constants.f0_bound)}};
  j["drift_reads_density"] = drift_reads_density;
  j["drift_reads_measure"] = drift_reads_measure;
  j["diffusion_reads_measure"] = diffusion_reads_measure;
  j["constant_sigma"] = constant_sigma ? nlohmann::json(*constant_sigma) : nlohmann::json(nullptr);
  return j;
}

void CoefficientSet::validate() const {
  if (!drift || !diffusion) throw ValidationError("coefficient set '" + name + "' is missing b or sigma");
  if (dim == 0 || noise_dim == 0) throw ValidationError("coefficient set dimensions must be positive");
  if (!(constants.C > 0.0)) throw ValidationError("declared constant C must be positive");
  if (!(constants.beta > 0.0 && constants.beta < 1.0)) throw ValidationError("declared beta must lie in (0, 1)");
  if (!(constants.p >= 1.0)) throw ValidationError("declared p must be >= 1");
  if (!(constants.f0_bound > 0.0)) throw ValidationError("declared f0 bound must be positive");
}

std::vector<std::string> scenario_names() {
  return {"tanh-mean", "pure-diffusion", "density-repulsion", "translation"};
}

CoefficientSet scenario(const std::string& name, const nlohmann::json& parameters) {
  if (!parameters.is_object()) throw ValidationError("scenario parameters must be an object");
  CoefficientSet cs;
  cs.name = name;
  cs.parameters = parameters;
  const std::size_t d = scenario_dim(parameters);
  const double rd = std::sqrt(static_cast<double>(d));
  cs.dim = d;
  cs.noise_dim = d;
  cs.constants = {2.0 * rd, 0.5, 1.0, 1.0};

  if (name == "tanh-mean") {
    cs.drift = [d](double, std::span<const double>, double r, const MeasureView& m, std::span<double> out) {
      const double push = std::tanh(r);
      const auto mean = m.mean();
      for (std::size_t a = 0; a < d; ++a) out[a] = push + 0.5 * std::clamp(mean[a], -5.0, 5.0);
    };
    cs.diffusion = scaled_identity(d, 1.0);
    cs.constants.f0_bound = 3.5 * rd;
    cs.constant_sigma = 1.0;
  } else if (name == "pure-diffusion") {
    cs.drift = [](double, std::span<const double>, double, const MeasureView&, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
    cs.diffusion = scaled_identity(d, 1.0);
    cs.drift_reads_density = false;
    cs.drift_reads_measure = false;
    cs.constant_sigma = 1.0;
  } else if (name == "density-repulsion") {
    cs.drift = [d](double, std::span<const double> x, double r, const MeasureView&, std::span<double> out) {
      double norm = 0.0;
      for (double c : x) norm += c * c;
      norm = std::sqrt(norm);
      const double push = -std::atan(r) / (1.0 + norm);
      for (std::size_t a = 0; a < d; ++a) out[a] = push * x[a];
    };
    cs.diffusion = scaled_identity(d, 1.0);
    cs.drift_reads_measure = false;
    cs.constants.f0_bound = 0.5 * std::numbers::pi;
    cs.constant_sigma = 1.0;
  } else if (name == "translation") {
    std::vector<double> c(d, 1.0);
    if (parameters.contains("c")) {
      const auto& jc = parameters.at("c");
      if (jc.is_number()) {
        std::fill(c.begin(), c.end(), jc.get<double>());
      } else if (jc.is_array() && jc.size() == d) {
        for (std::size_t a = 0; a < d; ++a) c[a] = jc.at(a).get<double>();
      } else {
        throw ValidationError("translation parameter c must be a number or a length-" +
                              std::to_string(d) + " array");
      }
    }
    const double eps = parameters.value("epsilon", 1.0);
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ValidationError("translation epsilon must be >= 0");
    for (double v : c) {
      if (!std::isfinite(v)) throw ValidationError("translation velocity must be finite");
    }
    cs.drift = [c](double, std::span<const double>, double, const MeasureView&, std::span<double> out) {
      std::copy(c.begin(), c.end(), out.begin());
    };
    cs.diffusion = scaled_identity(d, eps);
    cs.drift_reads_density = false;
    cs.drift_reads_measure = false;
    cs.constant_sigma = eps;
    double speed = 0.0;
    for (double v : c) speed += v * v;
    cs.constants.f0_bound = std::max(1.0, std::sqrt(speed));
    cs.constants.C = eps > 0.0 ? eps * rd + rd / (eps * eps) : std::numeric_limits<double>::infinity();
  } else {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown scenario '" + name + "' (known: " + known + ")");
  }
  return cs;
}

bool AssumptionReport::all_pass() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
}

const ConditionResult& AssumptionReport::condition(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no assumption condition named " + name);
}

nlohmann::json AssumptionReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["sample_count"] = sample_count;
  j["seed"] = seed;
  j["all_pass"] = all_pass();
  auto& list = j["conditions"] = nlohmann::json::array();
  for (const auto& c : conditions) {
    list.push_back({{"name", c.name},
                    {"worst_ratio", finite_or_string(c.worst_ratio)},
                    {"bound", finite_or_string(c.bound)},
                    {"pass", c.pass}});
  }
  return j;
}

namespace {

enum Condition : std::size_t {
  kEllipticity,
  kDiffusionBound,
  kSigmaCombined,
  kSigmaHolderX,
  kSigmaLipschitzMeasure,
  kSigmaJoint,
  kDriftLipschitzR,
  kDriftLipschitzMeasure,
  kDriftJoint,
  kDriftEnvelope,
  kConditionCount
};

constexpr const char* kConditionNames[kConditionCount] = {
    "ellipticity",           "diffusion_bound",        "sigma_bound_combined", "sigma_holder_x",
    "sigma_lipschitz_measure", "sigma_regularity",     "drift_lipschitz_r",    "drift_lipschitz_measure",
    "drift_lipschitz",       "drift_envelope"};

struct Tuple {
  double t = 0.0;
  std::vector<double> x, y;
  double r = 0.0, r2 = 0.0;
  DiscreteMeasure m, m2;
};

Tuple draw_tuple(const CoefficientSet& cs, const TupleSampler& s, std::size_t index) {
  const CounterStream rng(s.seed, index, StreamPurpose::kAssumptionSampler);
  std::uint64_t block = 0;
  std::array<double, 2> pair{};
  bool have_second = false;
  auto uniform = [&]() {
    if (have_second) {
      have_second = false;
      return pair[1];
    }
    pair = rng.uniforms(block++);
    have_second = true;
    return pair[0];
  };
  const std::size_t d = cs.dim;
  Tuple tp;
  tp.t = s.horizon * uniform();
  tp.x.resize(d);
  tp.y.resize(d);
  for (auto& v : tp.x) v = s.box * (2.0 * uniform() - 1.0);
  for (auto& v : tp.y) v = s.box * (2.0 * uniform() - 1.0);
  tp.r = s.density_max * uniform();
  tp.r2 = s.density_max * uniform();
  auto cloud = [&]() {
    std::vector<double> pts(s.atoms * d);
    for (auto& v : pts) v = s.spread * (2.0 * uniform() - 1.0);
    return DiscreteMeasure::uniform(std::move(pts), d);
  };
  tp.m = cloud();
  tp.m2 = cloud();
  return tp;
}

double vector_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double ratio(double numerator, double denominator) {
  if (numerator == 0.0) return 0.0;
  return denominator > 0.0 ? numerator / denominator : std::numeric_limits<double>::infinity();
}

std::string describe(const Tuple& tp) {
  std::string s = "t=" + format_double(tp.t) + " x=(";
  for (std::size_t k = 0; k < tp.x.size(); ++k) s += (k ? "," : "") + format_double(tp.x[k]);
  s += ") y=(";
  for (std::size_t k = 0; k < tp.y.size(); ++k) s += (k ? "," : "") + format_double(tp.y[k]);
  s += ") r=" + format_double(tp.r) + " r'=" + format_double(tp.r2);
  return s;
}

}  // namespace

AssumptionReport check_assumptions(const CoefficientSet& cs, const TupleSampler& sampler,
                                   std::size_t n_samples) {
  cs.validate();
  if (n_samples == 0) throw ValidationError("check_assumptions: need at least one sample");
  if (!(sampler.horizon >= 0.0) || !(sampler.box > 0.0) || !(sampler.density_max > 0.0) ||
      sampler.atoms == 0 || sampler.atoms > kMaxLpSupport || !(sampler.spread > 0.0)) {
    throw ValidationError("check_assumptions: invalid sampler configuration");
  }
  const std::size_t d = cs.dim;
  const std::size_t m = cs.noise_dim;
  const double beta = cs.constants.beta;

  std::vector<double> ratios(n_samples * kConditionCount, 0.0);
  std::vector<char> finite(n_samples, 1);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_samples); ++si) {
    const auto s = static_cast<std::size_t>(si);
    const Tuple tp = draw_tuple(cs, sampler, s);
    const MeasureView view(tp.m);
    const MeasureView view2(tp.m2);
    std::vector<double> b_xr(d), b_xr2(d), b_xm2(d), b_xr2m2(d);
    std::vector<double> s_x(d * m), s_y(d * m), s_xm2(d * m), s_ym2(d * m);
    cs.drift(tp.t, tp.x, tp.r, view, b_xr);
    cs.drift(tp.t, tp.x, tp.r2, view, b_xr2);
    cs.drift(tp.t, tp.x, tp.r, view2, b_xm2);
    cs.drift(tp.t, tp.x, tp.r2, view2, b_xr2m2);
    cs.diffusion(tp.t, tp.x, view, s_x);
    cs.diffusion(tp.t, tp.y, view, s_y);
    cs.diffusion(tp.t, tp.x, view2, s_xm2);
    cs.diffusion(tp.t, tp.y, view2, s_ym2);

    bool ok = true;
    for (const auto* v : {&b_xr, &b_xr2, &b_xm2, &b_xr2m2, &s_x, &s_y, &s_xm2, &s_ym2})
      for (double c : *v) ok = ok && std::isfinite(c);
    finite[s] = ok;
    if (!ok) continue;

    const double wp = wasserstein_lp(tp.m, tp.m2, cs.constants.p).value;
    const double dx = vector_distance(tp.x, tp.y);
    const double dr = std::abs(tp.r - tp.r2);
    double* row = ratios.data() + s * kConditionCount;
    const double sigma_norm = frobenius(s_x);
    const double inv_norm = inverse_diffusion_norm(s_x, d, m);
    row[kEllipticity] = inv_norm;
    row[kDiffusionBound] = sigma_norm;
    row[kSigmaCombined] = sigma_norm + inv_norm;
    row[kSigmaHolderX] = ratio(vector_distance(s_x, s_y), std::pow(dx, beta));
    row[kSigmaLipschitzMeasure] = ratio(vector_distance(s_x, s_xm2), wp);
    row[kSigmaJoint] = ratio(vector_distance(s_x, s_ym2), std::pow(dx, beta) + wp);
    row[kDriftLipschitzR] = ratio(vector_distance(b_xr, b_xr2), dr);
    row[kDriftLipschitzMeasure] = ratio(vector_distance(b_xr, b_xm2), wp);
    row[kDriftJoint] = ratio(vector_distance(b_xr, b_xr2m2), dr + wp);
    row[kDriftEnvelope] = std::sqrt(pairwise_sum_of(d, [&](std::size_t a) { return b_xr[a] * b_xr[a]; }));
  }

  for (std::size_t s = 0; s < n_samples; ++s) {
    if (!finite[s]) {
      throw NumericalError("coefficient set '" + cs.name + "' returned a non-finite value at sample " +
                           std::to_string(s) + ": " + describe(draw_tuple(cs, sampler, s)));
    }
  }

  AssumptionReport report;
  report.scenario = cs.name;
  report.sample_count = n_samples;
  report.seed = sampler.seed;
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    double worst = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const double v = ratios[s * kConditionCount + c];
      if (std::isnan(v)) {
        worst = v;
        break;
      }
      worst = std::max(worst, v);
    }
    const double bound = c == kDriftEnvelope ? cs.constants.f0_bound : cs.constants.C;
    const bool pass = std::isfinite(worst) && worst <= bound * (1.0 + 1e-6);
    report.conditions.push_back({kConditionNames[c], worst, bound, pass});
  }
  return report;
}

}  // namespace mckv
