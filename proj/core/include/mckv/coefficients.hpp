#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mckv/measure.hpp"

namespace mckv {

/// Non-owning view of a probability measure handed to coefficient functions.
/// Empty weights mean equal weights. The mean is computed once on
/// construction because scenarios read it for every particle.
class MeasureView {
 public:
  MeasureView(std::size_t dim, std::span<const double> points, std::span<const double> weights = {});
  explicit MeasureView(const DiscreteMeasure& m) : MeasureView(m.dim, m.points, m.weights) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return points_.size() / dim_; }
  std::span<const double> points() const { return points_; }
  double weight(std::size_t i) const {
    return weights_.empty() ? 1.0 / static_cast<double>(size()) : weights_[i];
  }
  std::span<const double> mean() const { return mean_; }

 private:
  std::size_t dim_;
  std::span<const double> points_;
  std::span<const double> weights_;
  std::vector<double> mean_;
};

/// b(t, x, r, m) written into `out` (length d).
using DriftFn =
    std::function<void(double t, std::span<const double> x, double r, const MeasureView& m, std::span<double> out)>;
/// sigma(t, x, m) written into `out` as a d x m row-major matrix.
using DiffusionFn =
    std::function<void(double t, std::span<const double> x, const MeasureView& m, std::span<double> out)>;

struct CoefficientConstants {
  double C = 1.0;         ///< bound/Lipschitz constant
  double beta = 0.5;      ///< Hoelder exponent of sigma in x, in (0, 1)
  double p = 1.0;         ///< moment / Wasserstein order
  double f0_bound = 0.0;  ///< constant envelope for |b|
};

struct CoefficientSet {
  std::string name;
  nlohmann::json parameters = nlohmann::json::object();
  std::size_t dim = 1;
  std::size_t noise_dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  CoefficientConstants constants;
  bool drift_reads_density = true;
  bool drift_reads_measure = true;
  bool diffusion_reads_measure = false;
  /// Set when sigma = s * I everywhere.
  std::optional<double> constant_sigma;

  /// Name, parameters, constants and flags: the metadata that identifies a run.
  nlohmann::json descriptor() const;
  void validate() const;
};

std::vector<std::string> scenario_names();

/// Built-in scenarios. Parameters (all optional): "dim"; for "translation"
/// "c" (number or array) and "epsilon".
CoefficientSet scenario(const std::string& name, const nlohmann::json& parameters = nlohmann::json::object());

/// Random tuples (t, x, y, r, r', m, m') at which the assumption inequalities
/// are evaluated. Measures are small equally weighted clouds.
struct TupleSampler {
  std::uint64_t seed = 1;
  double horizon = 1.0;
  double box = 5.0;          ///< x, y uniform in [-box, box]^d
  double density_max = 5.0;  ///< r, r' uniform in [0, density_max]
  std::size_t atoms = 4;     ///< atoms per sampled measure
  double spread = 3.0;       ///< atoms uniform in [-spread, spread]^d
};

struct ConditionResult {
  std::string name;
  double worst_ratio = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct AssumptionReport {
  std::string scenario;
  std::vector<ConditionResult> conditions;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;

  bool all_pass() const;
  const ConditionResult& condition(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Evaluates each inequality of the standing assumptions on n_samples
/// seeded tuples and reports the worst ratios against the declared
/// constants. Deterministic in the sampler seed for any thread count.
AssumptionReport check_assumptions(const CoefficientSet& cs, const TupleSampler& sampler,
                                   std::size_t n_samples);

}  // namespace mckv
