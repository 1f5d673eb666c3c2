#include "mckv/fokker_planck.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "mckv/error.hpp"
#include "mckv/io.hpp"
#include "mckv/summation.hpp"

namespace mckv {

double heat_kernel_eval(const HeatKernelParams& hk, double t, std::span<const double> x) {
  if (!(t > 0.0)) throw ValidationError("heat_kernel_eval: t must be positive");
  if (!(hk.lambda > 0.0)) throw ValidationError("heat_kernel_eval: lambda must be positive");
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  const double d = static_cast<double>(x.size());
  return std::pow(t, -0.5 * (hk.gamma + d)) * std::exp(-hk.lambda * r2 / t);
}

namespace {

struct Tridiagonal {
  std::vector<double> lower, diag, upper;
};

// Thomas algorithm; the matrices built here are strictly diagonally dominant.
void solve_tridiagonal(const Tridiagonal& m, std::span<double> rhs) {
  const std::size_t n = rhs.size();
  std::vector<double> c(n), d(n);
  c[0] = m.upper[0] / m.diag[0];
  d[0] = rhs[0] / m.diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double denom = m.diag[i] - m.lower[i] * c[i - 1];
    c[i] = i + 1 < n ? m.upper[i] / denom : 0.0;
    d[i] = (rhs[i] - m.lower[i] * d[i - 1]) / denom;
  }
  rhs[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = d[i] - c[i] * rhs[i + 1];
}

class FpStepper {
 public:
  FpStepper(const CoefficientSet& cs, const GridSpec& spec) : cs_(cs), spec_(spec), m_(spec.size()) {
    h_ = spec.cell_width[0];
    x_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) x_[i] = spec.node(0, i);
  }

  // One step from `l` at time t. `lagged` supplies the density argument and
  // the measure for the drift. Returns the leaked mass.
  double step(std::span<const double> l, std::span<const double> lagged, double t, double dt,
              std::span<double> out) const {
    const double mass = pairwise_sum(lagged) * h_;
    std::vector<double> weights(m_);
    for (std::size_t i = 0; i < m_; ++i) weights[i] = mass > 0.0 ? lagged[i] * h_ / mass : 1.0 / static_cast<double>(m_);
    const MeasureView law(1, x_, weights);

    std::vector<double> b(m_);
    std::vector<double> a(m_);
    std::vector<double> sigma(cs_.noise_dim);
    double out1 = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::span<const double> xi(&x_[i], 1);
      cs_.drift(t, xi, lagged[i], law, std::span<double>(&out1, 1));
      b[i] = out1;
      cs_.diffusion(t, xi, law, sigma);
      double s2 = 0.0;
      for (double s : sigma) s2 += s * s;
      a[i] = s2;
      if (!std::isfinite(b[i]) || !std::isfinite(a[i])) {
        throw NumericalError("fokker-planck: non-finite coefficient at x=" + format_double(x_[i]) +
                             ", t=" + format_double(t));
      }
    }

    // Face f sits between cells f-1 and f; faces 0 and m are the boundary.
    std::vector<double> flux(m_ + 1);
    double cfl = 0.0;
    for (std::size_t f = 0; f <= m_; ++f) {
      double v;
      if (f == 0) {
        v = b[0];
        flux[f] = std::min(v, 0.0) * l[0];
      } else if (f == m_) {
        v = b[m_ - 1];
        flux[f] = std::max(v, 0.0) * l[m_ - 1];
      } else {
        v = 0.5 * (b[f - 1] + b[f]);
        flux[f] = std::max(v, 0.0) * l[f - 1] + std::min(v, 0.0) * l[f];
      }
      cfl = std::max(cfl, std::abs(v) * dt / h_);
    }
    if (cfl > 1.0) {
      throw ValidationError("fokker-planck: advective CFL number " + format_double(cfl) +
                            " exceeds 1 (reduce dt or coarsen dx)");
    }
    for (std::size_t i = 0; i < m_; ++i) out[i] = l[i] - dt / h_ * (flux[i + 1] - flux[i]);
    double leaked = dt * (flux[m_] - flux[0]);

    const bool diffusive = std::any_of(a.begin(), a.end(), [](double v) { return v > 0.0; });
    if (diffusive) {
      // (I - dt/2 D2 a) l_new = l_star, ghost values mirror with a sign flip
      // so the density vanishes on the boundary faces.
      const double alpha = 0.5 * dt / (h_ * h_);
      Tridiagonal sys{std::vector<double>(m_), std::vector<double>(m_), std::vector<double>(m_)};
      for (std::size_t i = 0; i < m_; ++i) {
        sys.diag[i] = 1.0 + 2.0 * alpha * a[i];
        if (i > 0) sys.lower[i] = -alpha * a[i - 1];
        if (i + 1 < m_) sys.upper[i] = -alpha * a[i + 1];
      }
      sys.diag[0] += alpha * a[0];
      sys.diag[m_ - 1] += alpha * a[m_ - 1];
      solve_tridiagonal(sys, out);
      leaked += dt / h_ * (a[0] * out[0] + a[m_ - 1] * out[m_ - 1]);
    }
    return leaked;
  }

 private:
  const CoefficientSet& cs_;
  GridSpec spec_;
  std::size_t m_;
  double h_;
  std::vector<double> x_;
};

void check_and_clip(std::span<double> values, double t) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < -1e-12 || !std::isfinite(values[i])) {
      throw NumericalError("fokker-planck: density " + format_double(values[i]) + " at node " +
                           std::to_string(i) + ", t=" + format_double(t));
    }
    values[i] = std::max(values[i], 0.0);
  }
}

}  // namespace

std::vector<FPState> solve_nonlinear_fp(const CoefficientSet& cs, const GridDensity& l_nu, double T, double dt,
                                        const FPOptions& options) {
  cs.validate();
  const GridSpec& spec = l_nu.spec();
  if (spec.dim() != 1 || cs.dim != 1) throw ValidationError("solve_nonlinear_fp: only d = 1 is supported");
  if (cs.diffusion_reads_measure) {
    throw ValidationError("solve_nonlinear_fp: sigma must not depend on the measure");
  }
  if (!(dt > 0.0) || !(T >= 0.0)) throw ValidationError("solve_nonlinear_fp: need dt > 0 and T >= 0");
  if (options.fixed_point_iterations < 1) throw ValidationError("solve_nonlinear_fp: fixed_point_iterations >= 1");
  l_nu.validate();

  const std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  std::vector<std::size_t> marks;
  for (double t : options.snapshot_times) {
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw ValidationError("solve_nonlinear_fp: snapshot time outside [0, T]");
    const double k = std::round(t / dt);
    if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, t)) {
      throw ValidationError("solve_nonlinear_fp: snapshot time " + format_double(t) + " is not a multiple of dt");
    }
    marks.push_back(static_cast<std::size_t>(k));
  }
  std::sort(marks.begin(), marks.end());

  FpStepper stepper(cs, spec);
  std::vector<FPState> states;
  FPState current{l_nu, 0.0, 0.0};
  states.push_back(current);
  if (options.observer) options.observer(current);

  const std::size_t m = spec.size();
  std::vector<double> next(m), previous_iterate(m);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double step_dt = (k + 1 == steps) ? T - t : dt;
    const auto l = current.density.values();
    double leaked = 0.0;
    std::copy(l.begin(), l.end(), previous_iterate.begin());
    for (int it = 0; it < options.fixed_point_iterations; ++it) {
      leaked = stepper.step(l, previous_iterate, t, step_dt, next);
      check_and_clip(next, t + step_dt);
      if (options.fixed_point_iterations == 1) break;
      double change = 0.0;
      for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(next[i] - previous_iterate[i]));
      std::copy(next.begin(), next.end(), previous_iterate.begin());
      if (change < options.fixed_point_tolerance) break;
    }
    std::copy(next.begin(), next.end(), current.density.values().begin());
    current.time = k + 1 == steps ? T : static_cast<double>(k + 1) * dt;
    current.leakage += leaked;
    if (options.observer) options.observer(current);
    const bool marked = std::binary_search(marks.begin(), marks.end(), k + 1);
    if (options.record_every_step || marked || k + 1 == steps) states.push_back(current);
  }
  return states;
}

// ---------------------------------------------------------------------------
// Duhamel right-hand side

struct DuhamelAccumulator::Fft {
  static std::mutex& planner_mutex() {
    static std::mutex mutex;
    return mutex;
  }

  explicit Fft(std::size_t m) : m(m) {
    length = 1;
    while (length < 2 * m) length <<= 1;
    real = fftw_alloc_real(length);
    spectrum = fftw_alloc_complex(length / 2 + 1);
    kernel_spectrum = fftw_alloc_complex(length / 2 + 1);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(length), real, spectrum, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(length), spectrum, real, FFTW_ESTIMATE);
  }
  ~Fft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(forward);
      fftw_destroy_plan(backward);
    }
    fftw_free(real);
    fftw_free(spectrum);
    fftw_free(kernel_spectrum);
  }

  // out[i] = sum_j f[j] K(i - j) for i in [0, m), K given on [-(m-1), m-1].
  void convolve(std::span<const double> f, const std::function<double(long)>& kernel, std::span<double> out) {
    const long reach = static_cast<long>(m) - 1;
    std::fill(real, real + length, 0.0);
    for (long k = -reach; k <= reach; ++k) {
      real[k >= 0 ? static_cast<std::size_t>(k) : length - static_cast<std::size_t>(-k)] = kernel(k);
    }
    fftw_execute_dft_r2c(forward, real, kernel_spectrum);
    std::fill(real, real + length, 0.0);
    std::copy(f.begin(), f.end(), real);
    fftw_execute_dft_r2c(forward, real, spectrum);
    for (std::size_t k = 0; k < length / 2 + 1; ++k) {
      const double re = spectrum[k][0] * kernel_spectrum[k][0] - spectrum[k][1] * kernel_spectrum[k][1];
      const double im = spectrum[k][0] * kernel_spectrum[k][1] + spectrum[k][1] * kernel_spectrum[k][0];
      spectrum[k][0] = re;
      spectrum[k][1] = im;
    }
    fftw_execute_dft_c2r(backward, spectrum, real);
    const double scale = 1.0 / static_cast<double>(length);
    for (std::size_t i = 0; i < m; ++i) out[i] = real[i] * scale;
  }

  std::size_t m;
  std::size_t length;
  double* real;
  fftw_complex* spectrum;
  fftw_complex* kernel_spectrum;
  fftw_plan forward;
  fftw_plan backward;
};

namespace {

// Mass of N(0, s^2) on [a, b], accurate in both tails.
double normal_interval_mass(double a, double b, double s) {
  const double k = 1.0 / (s * std::numbers::sqrt2);
  if (a >= 0.0) return 0.5 * (std::erfc(a * k) - std::erfc(b * k));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * k) - std::erfc(-a * k));
  return 1.0 - 0.5 * (std::erfc(-a * k) + std::erfc(b * k));
}

}  // namespace

DuhamelAccumulator::DuhamelAccumulator(const CoefficientSet& cs, double sigma0, const GridDensity& l_nu,
                                       double t_final)
    : cs_(&cs), sigma0_(sigma0), spec_(l_nu.spec()), t_final_(t_final) {
  if (spec_.dim() != 1 || cs.dim != 1) throw ValidationError("duhamel: only d = 1 is supported");
  if (!(sigma0 > 0.0)) throw ValidationError("duhamel: sigma0 must be positive");
  if (!cs.constant_sigma || std::abs(*cs.constant_sigma - sigma0) > 1e-12 * sigma0) {
    throw ValidationError("duhamel: the coefficient set must have constant sigma = sigma0 * I");
  }
  if (!(t_final >= 0.0)) throw ValidationError("duhamel: t_final must be nonnegative");
  const std::size_t m = spec_.size();
  fft_ = std::make_unique<Fft>(m);
  smoothed_initial_.resize(m);
  integral_.assign(m, 0.0);

  const double h = spec_.cell_width[0];
  const double spread = sigma0 * std::sqrt(t_final);
  if (spread == 0.0) {
    std::copy(l_nu.values().begin(), l_nu.values().end(), smoothed_initial_.begin());
  } else {
    fft_->convolve(l_nu.values(),
                   [&](long k) {
                     const double z = static_cast<double>(k) * h;
                     return normal_interval_mass(z - 0.5 * h, z + 0.5 * h, spread);
                   },
                   smoothed_initial_);
  }
}

DuhamelAccumulator::~DuhamelAccumulator() = default;

std::vector<double> DuhamelAccumulator::drift_term(const FPState& state) const {
  const std::size_t m = spec_.size();
  std::vector<double> term(m, 0.0);
  const double tau = sigma0_ * sigma0_ * (t_final_ - state.time);
  if (!(tau > 0.0)) return term;

  const double h = spec_.cell_width[0];
  const auto l = state.density.values();
  std::vector<double> x(m), flux(m), weights(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = spec_.node(0, i);
  const double mass = pairwise_sum(l) * h;
  for (std::size_t i = 0; i < m; ++i) weights[i] = mass > 0.0 ? l[i] * h / mass : 1.0 / static_cast<double>(m);
  const MeasureView law(1, x, weights);
  double b = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    cs_->drift(state.time, std::span<const double>(&x[i], 1), l[i], law, std::span<double>(&b, 1));
    flux[i] = l[i] * b;
  }

  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * tau);
  const auto gauss = [&](double z) { return norm * std::exp(-0.5 * z * z / tau); };
  fft_->convolve(flux,
                 [&](long k) {
                   const double z = static_cast<double>(k) * h;
                   return gauss(z - 0.5 * h) - gauss(z + 0.5 * h);
                 },
                 term);
  return term;
}

void DuhamelAccumulator::add(const FPState& state) {
  if (!state.density.spec().same_as(spec_)) throw ValidationError("duhamel: state lives on a different grid");
  if (state.time > t_final_ * (1.0 + 1e-12) + 1e-15) throw ValidationError("duhamel: state after t_final");
  if (previous_time_ < 0.0 && state.time != 0.0) throw ValidationError("duhamel: first state must be at t = 0");
  if (previous_time_ >= 0.0 && !(state.time > previous_time_)) {
    throw ValidationError("duhamel: states must arrive in increasing time");
  }
  std::vector<double> term = drift_term(state);
  if (previous_time_ >= 0.0) {
    const double half = 0.5 * (state.time - previous_time_);
    for (std::size_t i = 0; i < term.size(); ++i) integral_[i] += half * (previous_term_[i] + term[i]);
  }
  previous_term_ = std::move(term);
  previous_time_ = state.time;
}

GridDensity DuhamelAccumulator::rhs() const {
  std::vector<double> values(smoothed_initial_.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = smoothed_initial_[i] + integral_[i];
  // Not validated: the quadrature may dip marginally below zero in the tails.
  return GridDensity(spec_, std::move(values));
}

double DuhamelAccumulator::residual(const GridDensity& l_t) const {
  if (!l_t.spec().same_as(spec_)) throw ValidationError("duhamel: density lives on a different grid");
  double worst = 0.0;
  for (std::size_t i = 0; i < smoothed_initial_.size(); ++i) {
    worst = std::max(worst, std::abs(l_t[i] - (smoothed_initial_[i] + integral_[i])));
  }
  return worst;
}

double duhamel_residual(std::span<const FPState> states, const CoefficientSet& cs, double sigma0) {
  if (states.empty()) throw ValidationError("duhamel_residual: no states");
  DuhamelAccumulator acc(cs, sigma0, states.front().density, states.back().time);
  for (const auto& s : states) acc.add(s);
  return acc.residual(states.back().density);
}

}  // namespace mckv
