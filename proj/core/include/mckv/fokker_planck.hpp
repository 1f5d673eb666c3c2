#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mckv/coefficients.hpp"
#include "mckv/grid.hpp"

namespace mckv {

struct HeatKernelParams {
  double gamma = 0.0;
  double lambda = 0.5;
};

/// t^{-(gamma + d)/2} exp(-lambda |x|^2 / t).
double heat_kernel_eval(const HeatKernelParams& hk, double t, std::span<const double> x);

struct FPState {
  GridDensity density;
  double time = 0.0;
  /// Mass that has left through the domain boundary up to `time`.
  double leakage = 0.0;
};

struct FPOptions {
  /// Times (multiples of dt) at which states are returned besides 0 and T.
  std::vector<double> snapshot_times;
  bool record_every_step = false;
  /// Sweeps of the lagged density argument per step; 1 = plain lagging.
  int fixed_point_iterations = 1;
  double fixed_point_tolerance = 1e-10;
  /// Called with every state, including t = 0.
  std::function<void(const FPState&)> observer;
};

/// Finite-volume solver for the 1-D limit equation
///   d_t l = -d_x(b(t, x, l(x), mu_t) l) + 1/2 d_xx(a l),  a = sigma^2,
/// on the grid of `l_nu`: explicit upwind advection with face velocities
/// averaged from cell-centre drifts, backward-Euler diffusion, and absorbing
/// boundaries whose outflow is accumulated as leakage. The drift reads the
/// density and the grid measure of the current state. When sigma vanishes
/// identically the diffusion solve is skipped (pure advection).
std::vector<FPState> solve_nonlinear_fp(const CoefficientSet& cs, const GridDensity& l_nu, double T, double dt,
                                        const FPOptions& options = {});

/// Streaming evaluation of the Duhamel right-hand side
///   int g_{s0^2 t}(x - y) l_nu(y) dy + int_0^t int l_s(y) b_s(y) d_y g_{s0^2 (t-s)}(x - y) dy ds
/// for sigma = s0 * I. Space integrals are exact per cell for the piecewise
/// constant states (convolutions done by FFT); time uses the trapezoid rule
/// over the states passed to add().
class DuhamelAccumulator {
 public:
  DuhamelAccumulator(const CoefficientSet& cs, double sigma0, const GridDensity& l_nu, double t_final);
  ~DuhamelAccumulator();
  DuhamelAccumulator(const DuhamelAccumulator&) = delete;
  DuhamelAccumulator& operator=(const DuhamelAccumulator&) = delete;

  /// States must arrive in increasing time, starting at 0, none after t_final.
  void add(const FPState& state);
  GridDensity rhs() const;
  /// sup over nodes of |l_t - rhs|.
  double residual(const GridDensity& l_t) const;

 private:
  struct Fft;
  std::vector<double> drift_term(const FPState& state) const;

  const CoefficientSet* cs_;
  double sigma0_;
  GridSpec spec_;
  double t_final_;
  std::vector<double> smoothed_initial_;
  std::vector<double> integral_;
  std::vector<double> previous_term_;
  double previous_time_ = -1.0;
  std::unique_ptr<Fft> fft_;
};

/// sup |l_T - RHS| for the last state, with the time integral taken over all
/// given states (which must start at t = 0).
double duhamel_residual(std::span<const FPState> states, const CoefficientSet& cs, double sigma0);

}  // namespace mckv
