// Runs the acceptance criteria and prints one [PASS]/[FAIL] line per
// criterion. Usage: mckv_acceptance [criterion numbers...]

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "app.hpp"
#include "mckv/coefficients.hpp"
#include "mckv/diagnostics.hpp"
#include "mckv/fokker_planck.hpp"
#include "mckv/io.hpp"
#include "mckv/particles.hpp"
#include "mckv/rng.hpp"
#include "mckv/stability.hpp"
#include "mckv/transport.hpp"
#include "oracles.hpp"

using namespace mckv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Seeded uniform draws for fixture generation.
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

DiscreteMeasure random_measure(Draws& d, std::size_t size) {
  DiscreteMeasure m;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    m.points.push_back(d.uniform(-5.0, 5.0));
    m.weights.push_back(d.uniform(0.01, 1.0));
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  return m;
}

std::vector<double> dyadic_times(double T, int levels) {
  std::vector<double> t;
  for (int k = levels - 1; k >= 0; --k) t.push_back(T * std::exp2(-k));
  return t;
}

// ---------------------------------------------------------------------------

Outcome transport_equivalence() {
  double worst = 0.0;
  for (std::size_t c = 0; c < 200; ++c) {
    Draws d(101, c);
    const auto mu = random_measure(d, d.integer(1, 64));
    const auto nu = random_measure(d, d.integer(1, 64));
    const double p = c % 2 ? 2.0 : 1.0;
    worst = std::max(worst, std::abs(wasserstein_1d(mu, nu, p) - wasserstein_lp(mu, nu, p).value));
  }
  return {worst <= 1e-9, "200 pairs, max |W_1d - W_lp| = " + fmt(worst) + " (tol 1e-9)"};
}

Outcome duality_attainment() {
  const TestFunction plus{[](std::span<const double> x) { return x[0]; }, 1.0};
  const TestFunction minus{[](std::span<const double> x) { return -x[0]; }, 1.0};
  double worst = 0.0;
  for (std::size_t c = 0; c < 50; ++c) {
    Draws d(202, c);
    DiscreteMeasure mu, nu;
    if (c % 2 == 0) {
      const double a = d.uniform(-5.0, 5.0);
      mu = DiscreteMeasure::uniform({a});
      nu = DiscreteMeasure::uniform({a + d.uniform(-3.0, 3.0)});
    } else {
      // Both atoms move the same way and keep their order, so the monotone
      // coupling moves all mass in one direction.
      const double a = d.uniform(-3.0, 0.0);
      const double b = a + d.uniform(0.5, 3.0);
      const double w = d.uniform(0.1, 0.9);
      const double sign = d.uniform() < 0.5 ? -1.0 : 1.0;
      const double s1 = sign * d.uniform(0.0, 2.0);
      const double s2 = sign * d.uniform(0.0, 2.0);
      mu = DiscreteMeasure{1, {a, b}, {w, 1.0 - w}};
      nu = DiscreteMeasure{1, {a + s1, b + s2}, {w, 1.0 - w}};
    }
    const double dual = std::max(kantorovich_dual_value(plus, mu, nu), kantorovich_dual_value(minus, mu, nu));
    worst = std::max(worst, std::abs(dual - wasserstein_lp(mu, nu, 1.0).value));
  }
  return {worst <= 1e-9, "50 pairs, max |best dual - W_1| = " + fmt(worst) + " (tol 1e-9)"};
}

Outcome wp_dominance() {
  const auto spec = GridSpec::uniform_1d(-4.0, 4.0, 0.05);
  int violations = 0;
  double worst_slack = INFINITY;
  for (std::size_t c = 0; c < 100; ++c) {
    Draws d(303, c);
    std::vector<double> v1(spec.size(), 0.0), v2(spec.size(), 0.0);
    // Random blocks of constant height.
    for (auto* v : {&v1, &v2}) {
      const std::size_t blocks = d.integer(1, 6);
      for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t lo = d.integer(0, spec.size() - 1);
        const std::size_t hi = std::min(spec.size(), lo + d.integer(1, 40));
        const double h = d.uniform(0.1, 1.0);
        for (std::size_t i = lo; i < hi; ++i) (*v)[i] += h;
      }
    }
    GridDensity l1(spec, v1), l2(spec, v2);
    const double m1 = l1.mass(), m2 = l2.mass();
    for (auto& x : l1.values()) x /= m1;
    for (auto& x : l2.values()) x /= m2;
    for (double p : {1.0, 2.0}) {
      const double wpp =
          std::pow(wasserstein_1d(DiscreteMeasure::from_grid(l1), DiscreteMeasure::from_grid(l2), p), p);
      const double bound =
          std::max(1.0, std::pow(2.0, p - 1.0)) * weighted_tv(l1, l2, p).moment + 10.0 * spec.cell_width[0];
      worst_slack = std::min(worst_slack, bound - wpp);
      violations += wpp > bound;
    }
  }
  return {violations == 0,
          "200 checks, violations = " + std::to_string(violations) + ", min slack = " + fmt(worst_slack)};
}

Outcome gaussian_particle() {
  SimConfig c;
  c.N = 100000;
  c.T = 1.0;
  c.dt = 1e-3;
  c.seed = 404;
  c.snapshot_times = {1.0};
  const auto store =
      simulate(c, scenario("pure-diffusion"), GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 1e-3), 0.0, 1.0));
  const auto& x = store.at_time(1.0).cloud.positions;
  const double var = oracle::sample_variance(x);
  const double var_tol = 3.0 * 2.0 * std::sqrt(2.0 / static_cast<double>(c.N));
  const double sd = std::sqrt(2.0);
  const double w1 = oracle::w1_sample_to_cdf(x, [&](double t) { return oracle::normal_cdf(t, 0.0, sd); }, -15.0, 15.0);
  const bool pass = std::abs(var - 2.0) <= var_tol && w1 <= 0.02;
  return {pass, "variance = " + fmt(var, 6) + " (2 +- " + fmt(var_tol, 3) + "), W_1 to N(0,2) = " + fmt(w1) +
                    " (<= 0.02)"};
}

Outcome gaussian_fp() {
  const double dx = 0.005, dt = 1e-4;
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
  const auto states = solve_nonlinear_fp(scenario("pure-diffusion"), l0, 1.0, dt);
  const auto& l = states.back().density;
  double err = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    err = std::max(err, std::abs(l[i] - oracle::normal_pdf(l.spec().node(0, i), 0.0, std::sqrt(2.0))));
  }
  const double tol = 5.0 * (dx * dx + dt);
  const double loss = 1.0 - l.mass();
  return {err <= tol && loss <= 1e-6,
          "sup error = " + fmt(err) + " (<= " + fmt(tol) + "), mass loss = " + fmt(loss) + " (<= 1e-6)"};
}

Outcome particle_vs_fp() {
  const double dx = 0.005;
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
  const auto cs = scenario("tanh-mean");
  const std::vector<double> times{0.25, 0.5, 1.0};
  SimConfig c;
  c.N = 50000;
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_mollifier = 16;
  c.seed = 606;
  c.snapshot_times = times;
  const auto store = simulate(c, cs, l0);
  FPOptions options;
  options.snapshot_times = times;
  const auto states = solve_nonlinear_fp(cs, l0, 1.0, 1e-4, options);
  bool pass = true;
  std::string detail = "W_1(particles, FP):";
  for (double t : times) {
    const GridDensity* fp = nullptr;
    for (const auto& s : states) {
      if (std::abs(s.time - t) < 1e-9) fp = &s.density;
    }
    const double w = wasserstein1_to_grid(store.at_time(t).cloud.positions, *fp);
    pass = pass && w <= 0.03;
    detail += " t=" + fmt(t, 3) + ": " + fmt(w);
  }
  return {pass, detail + " (each <= 0.03)"};
}

Outcome duhamel() {
  const auto cs = scenario("tanh-mean");
  auto residual = [&](double dx, double dt) {
    const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
    DuhamelAccumulator acc(cs, 1.0, l0, 0.5);
    FPOptions options;
    options.observer = [&](const FPState& s) { acc.add(s); };
    const auto states = solve_nonlinear_fp(cs, l0, 0.5, dt, options);
    return acc.residual(states.back().density);
  };
  const double dx = 0.01, dt = 4e-4;
  const double coarse = residual(dx, dt);
  const double fine = residual(dx / 2.0, dt / 4.0);
  const double tol = 10.0 * (dx + std::sqrt(dt));
  return {coarse <= tol && fine < coarse,
          "residual(dx=" + fmt(dx) + ", dt=" + fmt(dt) + ") = " + fmt(coarse) + " (<= " + fmt(tol) +
              "), refined = " + fmt(fine) + " (must decrease)"};
}

Outcome holder_fit() {
  const double dx = 0.005;
  // Near-point-mass start: a Gaussian of width 3 dx.
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 3.0 * dx);
  SimConfig c;
  c.N = 100000;
  c.T = 1.0;
  c.dt = 1.0 / 1024.0;
  c.seed = 808;
  c.snapshot_times = dyadic_times(1.0, 8);
  const auto diffusion = holder_time_fit(simulate(c, scenario("pure-diffusion"), l0), 1.0);
  const auto tanh_mean = holder_time_fit(simulate(c, scenario("tanh-mean"), l0), 1.0);
  const double a = diffusion.exponent_fit.value_or(NAN);
  const double b = tanh_mean.exponent_fit.value_or(NAN);
  return {a >= 0.4 && a <= 0.6 && b >= 0.4,
          "pure-diffusion delta = " + fmt(a) + " (in [0.4, 0.6]), tanh-mean delta = " + fmt(b) + " (>= 0.4), " +
              std::to_string(diffusion.samples["pairs"].size()) + " pairs"};
}

Outcome sup_norm_bound() {
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.005), 0.0, 1.0);
  const double l0_sup = l0.sup_norm();
  const std::vector<double> times{0.25, 0.5, 0.75, 1.0};
  bool pass = true;
  std::string detail;
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / *lo;
  };
  std::uint64_t seed = 909;
  for (const auto& name : scenario_names()) {
    const auto cs = scenario(name);
    SimConfig c;
    c.N = 100000;
    c.T = 1.0;
    c.dt = 0.01;
    c.seed = seed++;
    c.snapshot_times = times;
    std::vector<double> c1_n;
    double c1_fine_grid = 0.0, argmax_time = 0.0;
    for (unsigned n : {8u, 16u, 32u}) {
      c.n_mollifier = n;
      const auto store = simulate(c, cs, l0);
      const MollifierFamily fam(1, n);
      double sup = 0.0, sup_fine = 0.0;
      for (const auto& s : store.snapshots) {
        const double v = density_snapshot(s.cloud, fam, GridSpec::uniform_1d(-8.0, 8.0, 0.01)).density.sup_norm();
        if (v > sup && n == 16) argmax_time = s.time;
        sup = std::max(sup, v);
        if (n == 16) {
          sup_fine = std::max(
              sup_fine, density_snapshot(s.cloud, fam, GridSpec::uniform_1d(-8.0, 8.0, 0.005)).density.sup_norm());
        }
      }
      c1_n.push_back(sup / l0_sup);
      if (n == 16) c1_fine_grid = sup_fine / l0_sup;
    }
    // Fokker-Planck oracle at two grids.
    std::vector<double> c1_fp;
    for (double dx : {0.01, 0.005}) {
      const auto l = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, dx), 0.0, 1.0);
      double sup = 0.0;
      for (const auto& s : solve_nonlinear_fp(cs, l, 1.0, dx * dx * 10.0)) sup = std::max(sup, s.density.sup_norm());
      c1_fp.push_back(sup / l.sup_norm());
    }
    const double s_n = spread(c1_n);
    const double s_grid = std::max(spread({c1_n[1], c1_fine_grid}), spread(c1_fp));
    pass = pass && s_n <= 0.3 && s_grid <= 0.3;
    detail += name + ": c1(n=8,16,32) = " + fmt(c1_n[0]) + "/" + fmt(c1_n[1]) + "/" + fmt(c1_n[2]) +
               " spread " + fmt(s_n, 3) + " (sup at t=" + fmt(argmax_time, 3) + "), grid refinement spread " +
              fmt(s_grid, 3) + "; ";
  }
  return {pass, detail + "(spreads <= 0.3)"};
}

Outcome mollifier_convergence() {
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.005), 0.0, 1.0);
  SimConfig c;
  c.N = 100000;
  c.T = 1.0;
  c.dt = 2e-3;
  c.seed = 1010;
  c.snapshot_times = {0.25, 0.5, 0.75, 1.0};
  const std::vector<unsigned> n_list{4, 8, 16, 32};
  const auto main_run = mollifier_convergence_study(scenario("tanh-mean"), l0, c, n_list);
  const auto control = mollifier_convergence_study(scenario("pure-diffusion"), l0, c, n_list);
  bool control_ok = true;
  for (double d : control.cauchy_distances) control_ok = control_ok && d <= control.noise_floor;
  std::string detail = "tanh-mean Cauchy distances";
  for (double d : main_run.cauchy_distances) detail += " " + fmt(d);
  detail += ", noise floor " + fmt(main_run.noise_floor) + " (band 2x), monotone " +
            (main_run.monotone ? "yes" : "no") + ", conclusive " + (main_run.conclusive ? "yes" : "no") +
            "; control max distance " +
            fmt(*std::max_element(control.cauchy_distances.begin(), control.cauchy_distances.end())) +
            " vs floor " + fmt(control.noise_floor);
  return {main_run.monotone && control_ok, detail};
}

Outcome stability_ratio() {
  const auto cs = scenario("tanh-mean");
  SimConfig c;
  c.T = 1.0;
  auto ratio = [&](double dx, double dt) {
    const auto spec = GridSpec::uniform_1d(-8.0, 8.0, dx);
    StabilityOptions options;
    options.fp_dt = dt;
    return stability_experiment(cs, GridDensity::gaussian_1d(spec, 0.0, 1.0), GridDensity::gaussian_1d(spec, 0.1, 1.0),
                                c, options);
  };
  const auto base = ratio(0.005, 1e-4);
  const auto fine = ratio(0.0025, 2.5e-5);
  const double change = std::abs(fine.ratio - base.ratio) / base.ratio;
  return {base.ratio <= 1.0 && fine.ratio <= 1.0 && change <= 0.5,
          "sup wTV " + fmt(base.sup_wtv) + ", initial wTV " + fmt(base.initial_wtv) + ", lambda " +
              fmt(base.lambda_bound) + ", ratio " + fmt(base.ratio) + " (<= 1); refined ratio " + fmt(fine.ratio) +
              ", relative change " + fmt(change, 3) + " (<= 0.5)"};
}

Outcome uniqueness_shadow() {
  const auto l0 = GridDensity::gaussian_1d(GridSpec::uniform_1d(-8.0, 8.0, 0.005), 0.0, 1.0);
  SimConfig c;
  c.N = 100000;
  c.T = 1.0;
  c.dt = 0.01;
  c.n_mollifier = 16;
  c.snapshot_times = {0.25, 0.5, 0.75, 1.0};
  c.seed = 1212;
  const auto a = simulate(c, scenario("tanh-mean"), l0);
  c.seed = 1213;
  const auto b = simulate(c, scenario("tanh-mean"), l0);
  bool pass = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const double w = wasserstein_1d_samples(a.snapshots[k].cloud.positions, b.snapshots[k].cloud.positions, 1.0);
    const double floor = mc_noise_floor_w1(a.snapshots[k].cloud.positions);
    pass = pass && w <= 3.0 * floor;
    worst = std::max(worst, w / floor);
  }
  return {pass, std::to_string(a.snapshots.size()) + " snapshots, max W_1 / noise floor = " + fmt(worst) + " (<= 3)"};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "mckv_acceptance_determinism";
  fs::remove_all(root);
  bool pass = true;
  std::size_t configs = 0, files = 0;
  std::string mismatches;
  for (const auto& entry : fs::directory_iterator(MCKV_FIXTURE_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    ++configs;
    const std::string text = read_file(entry.path());
    const std::string stem = entry.path().stem().string();
    nlohmann::json reference;
    for (int threads : {1, 2, 4}) {
      app::RunOptions o;
      o.threads = threads;
      o.output_dir = root / (stem + "_t" + std::to_string(threads));
      const auto r = app::run_experiment(text, o);
      if (threads == 1) {
        reference = r.manifest;
        files += reference["files"].size();
      } else if (r.manifest["files"] != reference["files"] || r.manifest["run_hash"] != reference["run_hash"]) {
        pass = false;
        mismatches += " " + stem + "@" + std::to_string(threads);
      }
    }
  }
#ifdef MCKV_CLI_PATH
  // Once through the executable, checked against the in-process manifest.
  const fs::path cli_dir = root / "cli";
  const std::string fixture = std::string(MCKV_FIXTURE_DIR) + "/pure_diffusion_simulate.ini";
  const std::string cmd = std::string(MCKV_CLI_PATH) + " simulate --config " + fixture + " --output-dir " +
                          cli_dir.string() + " --threads 3 > /dev/null";
  const int status = std::system(cmd.c_str());
  const auto cli_manifest = nlohmann::json::parse(read_file(cli_dir / "manifest.json"));
  const auto in_process = nlohmann::json::parse(read_file(root / "pure_diffusion_simulate_t1" / "manifest.json"));
  if (status != 0 || cli_manifest["run_hash"] != in_process["run_hash"]) {
    pass = false;
    mismatches += " cli";
  }
#endif
  omp_set_num_threads(1);
  fs::remove_all(root);
  return {pass && configs > 0, std::to_string(configs) + " fixture configs x threads {1,2,4}, " +
                                   std::to_string(files) + " files, identical hashes" +
                                   (mismatches.empty() ? "" : "; mismatches:" + mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "transport oracle equivalence", 10, transport_equivalence},
      {2, "Kantorovich duality attainment", 1, duality_attainment},
      {3, "W_p dominance by weighted TV", 30, wp_dominance},
      {4, "Gaussian oracle (particles)", 120, gaussian_particle},
      {5, "Gaussian oracle (Fokker-Planck)", 60, gaussian_fp},
      {6, "particle vs Fokker-Planck consistency", 300, particle_vs_fp},
      {7, "Duhamel residual", 300, duhamel},
      {8, "Hoelder-in-time fit", 180, holder_fit},
      {9, "density sup-norm bound", 300, sup_norm_bound},
      {10, "mollifier-index convergence", 900, mollifier_convergence},
      {11, "stability ratio", 300, stability_ratio},
      {12, "uniqueness shadow", 300, uniqueness_shadow},
      {13, "determinism", 120, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.1f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
