#include "app.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "mckv/coefficients.hpp"
#include "mckv/diagnostics.hpp"
#include "mckv/fokker_planck.hpp"
#include "mckv/io.hpp"
#include "mckv/particles.hpp"
#include "mckv/stability.hpp"
#include "mckv/summation.hpp"
#include "mckv/transport.hpp"

namespace mckv::app {

namespace fs = std::filesystem;

namespace {

// Failure carrying a chosen exit code and extra machine-readable details.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(int code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}
  int code() const { return code_; }
  const nlohmann::json& details() const { return details_; }

 private:
  int code_;
  nlohmann::json details_;
};

struct FileRecord {
  std::string path;
  std::string sha256;
  std::size_t bytes = 0;
};

class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& relative, const std::string& content) {
    const fs::path target = root_ / relative;
    fs::create_directories(target.parent_path());
    write_file(target, content);
    files_.push_back({relative, content_hash(content), content.size()});
  }
  void write_json(const std::string& relative, const nlohmann::json& j) { write(relative, j.dump(2) + "\n"); }

  const std::vector<FileRecord>& files() const { return files_; }

 private:
  fs::path root_;
  std::vector<FileRecord> files_;
};

std::string csv_row(std::initializer_list<double> values) {
  std::string row;
  for (double v : values) {
    if (!row.empty()) row += ',';
    row += format_double(v);
  }
  return row + "\n";
}

std::string indexed_name(const std::string& prefix, std::size_t k, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return prefix + buf + ext;
}

nlohmann::json cloud_moments(const ParticleCloud& cloud) {
  const std::size_t n = cloud.size();
  const auto& x = cloud.positions;
  const double mean = pairwise_sum_of(n, [&](std::size_t i) { return x[i * cloud.dim]; }) / static_cast<double>(n);
  const double var = pairwise_sum_of(n, [&](std::size_t i) {
                       const double d = x[i * cloud.dim] - mean;
                       return d * d;
                     }) /
                     static_cast<double>(n > 1 ? n - 1 : 1);
  return {{"mean", mean}, {"variance", var}};
}

// ---------------------------------------------------------------------------
// Commands

void run_simulate(const ExperimentConfig& cfg, Artifacts& out) {
  const auto cs = scenario(cfg.scenario, cfg.scenario_parameters);
  const auto l_nu = cfg.initial.density();
  TupleSampler sampler;
  sampler.seed = cfg.seed;
  sampler.horizon = std::max(cfg.sim.T, 1e-6);
  const auto smoke = check_assumptions(cs, sampler, 200);
  if (!smoke.all_pass()) {
    throw RunFailure(kExitValidation, "scenario '" + cs.name + "' fails the assumption smoke test",
                     {{"assumptions", smoke.to_json()}});
  }

  const auto store = simulate(cfg.sim, cs, l_nu);
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t k = 0; k < store.snapshots.size(); ++k) {
    const auto& snap = store.snapshots[k];
    nlohmann::json row = cloud_moments(snap.cloud);
    row["time"] = snap.time;
    if (cfg.formats.count("csv")) {
      const std::string name = indexed_name("snapshots/snapshot_", k, ".csv");
      std::ostringstream csv;
      write_snapshot_csv(csv, snap);
      out.write(name, csv.str());
      row["file"] = name;
    }
    summary.push_back(row);
  }
  if (cfg.formats.count("json")) {
    out.write_json("trajectory.json", {{"metadata", store.metadata},
                                       {"content_hash", store.content_hash()},
                                       {"complete", store.complete},
                                       {"snapshots", summary},
                                       {"assumptions", smoke.to_json()}});
  }
  if (!store.complete) {
    throw RunFailure(kExitRuntime, "wall-clock budget exceeded; the stored trajectory is partial",
                     {{"recorded_snapshots", store.snapshots.size()}});
  }
}

void run_fp_solve(const ExperimentConfig& cfg, Artifacts& out) {
  const auto cs = scenario(cfg.scenario, cfg.scenario_parameters);
  const auto l_nu = cfg.initial.density();
  FPOptions options;
  options.snapshot_times = cfg.sim.snapshot_times;
  options.fixed_point_iterations = cfg.fp.fixed_point_iterations;
  std::unique_ptr<DuhamelAccumulator> duhamel;
  if (cfg.fp.duhamel) {
    if (!cs.constant_sigma) throw ValidationError("fp.duhamel needs a scenario with sigma = s I");
    duhamel = std::make_unique<DuhamelAccumulator>(cs, *cs.constant_sigma, l_nu, cfg.sim.T);
    options.observer = [&](const FPState& s) { duhamel->add(s); };
  }
  const auto states = solve_nonlinear_fp(cs, l_nu, cfg.sim.T, cfg.fp.dt, options);

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto& s = states[k];
    nlohmann::json row = {{"time", s.time}, {"mass", s.density.mass()}, {"sup_norm", s.density.sup_norm()},
                          {"leakage", s.leakage}};
    if (cfg.formats.count("csv")) {
      const std::string name = indexed_name("fp/state_", k, ".csv");
      std::ostringstream csv;
      write_grid_csv(csv, s.density);
      out.write(name, csv.str());
      row["file"] = name;
    }
    rows.push_back(row);
  }
  nlohmann::json j = {{"scenario", cs.descriptor()},
                      {"dt", cfg.fp.dt},
                      {"grid", {{"lo", cfg.initial.lo}, {"hi", cfg.initial.hi}, {"dx", cfg.initial.dx}}},
                      {"states", rows}};
  if (duhamel) j["duhamel_residual"] = duhamel->residual(states.back().density);
  if (cfg.formats.count("json")) out.write_json("fp.json", j);
}

void run_converge(const ExperimentConfig& cfg, Artifacts& out) {
  const auto cs = scenario(cfg.scenario, cfg.scenario_parameters);
  const auto l_nu = cfg.initial.density();
  ConvergenceOptions options;
  options.noise_repeats = cfg.study.noise_repeats;
  const auto report = mollifier_convergence_study(cs, l_nu, cfg.sim, cfg.study.n_values, options);
  if (cfg.formats.count("json")) out.write_json("convergence.json", report.to_json());
  if (cfg.formats.count("csv")) {
    std::string csv = "n_low,n_high,sup_distance,noise_floor\n";
    for (std::size_t k = 0; k < report.cauchy_distances.size(); ++k) {
      csv += csv_row({static_cast<double>(report.n_values[k]), static_cast<double>(report.n_values[k + 1]),
                      report.cauchy_distances[k], report.noise_floors[k]});
    }
    out.write("convergence.csv", csv);
  }
  if (!report.conclusive) {
    throw RunFailure(kExitInconclusive, "Cauchy distances are within the Monte Carlo noise floor",
                     {{"noise_floor", report.noise_floor}, {"cauchy_distances", report.cauchy_distances}});
  }
}

void run_stability(const ExperimentConfig& cfg, Artifacts& out) {
  const auto cs = scenario(cfg.scenario, cfg.scenario_parameters);
  const auto l1 = cfg.initial.density();
  // Re-discretized on the same grid, so both densities share cells.
  InitialSpec moved = cfg.initial;
  moved.mean += cfg.study.translate;
  moved.a += cfg.study.translate;
  moved.b += cfg.study.translate;
  const auto l2 = moved.density();
  StabilityOptions options;
  options.fp_dt = cfg.fp.dt;
  options.times = cfg.study.times;
  options.particle_path = cfg.study.particle_path;
  options.assumption_seed = cfg.seed;
  const auto report = stability_experiment(cs, l1, l2, cfg.sim, options);
  if (cfg.formats.count("json")) out.write_json("stability.json", report.to_json());
  if (cfg.formats.count("csv")) {
    std::string csv = "t,wtv,wtv_particle\n";
    for (const auto& p : report.series) {
      csv += format_double(p.t) + ',' + format_double(p.wtv) + ',' +
             (p.wtv_particle ? format_double(*p.wtv_particle) : std::string()) + '\n';
    }
    out.write("stability.csv", csv);
  }
}

void run_check_assumptions(const ExperimentConfig& cfg, Artifacts& out) {
  const auto cs = scenario(cfg.scenario, cfg.scenario_parameters);
  TupleSampler sampler;
  sampler.seed = cfg.seed;
  sampler.horizon = std::max(cfg.sim.T, 1e-6);
  const auto report = check_assumptions(cs, sampler, cfg.study.samples);
  out.write_json("assumptions.json", report.to_json());
  if (!report.all_pass()) {
    nlohmann::json failing = nlohmann::json::array();
    for (const auto& c : report.conditions) {
      if (!c.pass) failing.push_back(c.name);
    }
    throw RunFailure(kExitValidation, "assumption check failed", {{"failing_conditions", failing}});
  }
}

void run_selftest(const ExperimentConfig& cfg, Artifacts& out) {
  const auto report = transport_selftest(cfg.seed);
  out.write_json("selftest.json", report);
  if (!report["pass"].get<bool>()) throw RunFailure(kExitRuntime, "transport self-test failed");
}

void dispatch(const ExperimentConfig& cfg, Artifacts& out) {
  if (cfg.command == "simulate") return run_simulate(cfg, out);
  if (cfg.command == "fp-solve") return run_fp_solve(cfg, out);
  if (cfg.command == "converge") return run_converge(cfg, out);
  if (cfg.command == "stability") return run_stability(cfg, out);
  if (cfg.command == "check-assumptions") return run_check_assumptions(cfg, out);
  if (cfg.command == "transport-selftest") return run_selftest(cfg, out);
  throw ValidationError("unknown command '" + cfg.command + "'");
}

nlohmann::json error_json(int code, const std::string& kind, const std::string& message) {
  return {{"exit_code", code}, {"kind", kind}, {"message", message}};
}

nlohmann::json files_json(const std::vector<FileRecord>& files) {
  auto sorted = files;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : sorted) j.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return j;
}

}  // namespace

RunResult run_experiment(const std::string& config_text, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (options.threads > 0) omp_set_num_threads(options.threads);

  RunResult result;
  std::optional<ExperimentConfig> cfg;
  nlohmann::json error;
  try {
    cfg = load_experiment(parse_config_text(config_text));
  } catch (const ConfigError& e) {
    result.exit_code = kExitValidation;
    error = error_json(kExitValidation, "config", e.what());
    error["line"] = e.line();
    error["column"] = e.column();
  } catch (const std::exception& e) {
    result.exit_code = kExitValidation;
    error = error_json(kExitValidation, "config", e.what());
  }

  fs::path dir = cfg ? cfg->output_dir : fs::path("mckv-out");
  if (const char* env = std::getenv("MCKV_OUTPUT_DIR"); env && *env) dir = env;
  if (options.output_dir) dir = *options.output_dir;
  result.output_dir = dir;

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());

  Artifacts out(dir);
  if (cfg) {
    try {
      dispatch(*cfg, out);
    } catch (const RunFailure& e) {
      result.exit_code = e.code();
      const char* kind = e.code() == kExitInconclusive ? "inconclusive"
                         : e.code() == kExitValidation ? "validation"
                                                       : "runtime";
      error = error_json(e.code(), kind, e.what());
      error["details"] = e.details();
    } catch (const ValidationError& e) {
      result.exit_code = kExitValidation;
      error = error_json(kExitValidation, "validation", e.what());
    } catch (const NumericalError& e) {
      result.exit_code = kExitRuntime;
      error = error_json(kExitRuntime, "runtime", e.what());
    } catch (const fs::filesystem_error& e) {
      result.exit_code = kExitValidation;
      error = error_json(kExitValidation, "output", e.what());
    } catch (const std::exception& e) {
      result.exit_code = kExitRuntime;
      error = error_json(kExitRuntime, "runtime", e.what());
    }
  }
  if (result.exit_code != kExitOk) out.write_json("error.json", error);

  // The run hash covers the inputs and outputs only, so it is comparable
  // across reruns regardless of timing or thread count.
  const auto files = files_json(out.files());
  std::string fingerprint = content_hash(config_text);
  for (const auto& f : files) fingerprint += f["path"].get<std::string>() + f["sha256"].get<std::string>();

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json manifest = {{"version", kVersion},
                             {"command", cfg ? cfg->command : std::string()},
                             {"exit_code", result.exit_code},
                             {"config", cfg ? cfg->to_json() : nlohmann::json(nullptr)},
                             {"config_text", config_text},
                             {"config_hash", content_hash(config_text)},
                             {"files", files},
                             {"run_hash", content_hash(fingerprint)},
                             {"wall_time_seconds", wall},
                             {"threads", omp_get_max_threads()},
                             {"libraries", {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  result.manifest = std::move(manifest);
  return result;
}

RunResult run_experiment_file(const fs::path& config_path, const RunOptions& options) {
  return run_experiment(read_file(config_path), options);
}

// ---------------------------------------------------------------------------
// Verification and plot data

VerifyResult verify_run(const fs::path& run_dir) {
  const auto manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"));
  VerifyResult r;
  for (const auto& f : manifest.at("files")) {
    const auto rel = f.at("path").get<std::string>();
    ++r.checked;
    if (!fs::exists(run_dir / rel)) {
      r.missing.push_back(rel);
    } else if (file_content_hash(run_dir / rel) != f.at("sha256").get<std::string>()) {
      r.mismatched.push_back(rel);
    }
  }
  return r;
}

namespace {

nlohmann::json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("missing upstream artifact '" + path.string() + "'");
  return nlohmann::json::parse(read_file(path));
}

std::vector<Snapshot> load_snapshots(const fs::path& run_dir) {
  const auto traj = read_json(run_dir / "trajectory.json");
  std::vector<Snapshot> out;
  for (const auto& row : traj.at("snapshots")) {
    if (!row.contains("file")) throw ValidationError("simulate run has no snapshot CSVs (formats excluded csv)");
    const auto path = run_dir / row["file"].get<std::string>();
    if (!fs::exists(path)) throw ValidationError("missing upstream artifact '" + path.string() + "'");
    std::istringstream in(read_file(path));
    out.push_back(read_snapshot_csv(in));
  }
  return out;
}

struct FpRun {
  std::vector<double> times;
  std::vector<GridDensity> states;
};

FpRun load_fp_states(const fs::path& run_dir) {
  const auto fp = read_json(run_dir / "fp.json");
  FpRun out;
  for (const auto& row : fp.at("states")) {
    if (!row.contains("file")) throw ValidationError("fp-solve run has no state CSVs (formats excluded csv)");
    const auto path = run_dir / row["file"].get<std::string>();
    if (!fs::exists(path)) throw ValidationError("missing upstream artifact '" + path.string() + "'");
    std::istringstream in(read_file(path));
    out.times.push_back(row["time"].get<double>());
    out.states.push_back(read_grid_csv(in));
  }
  return out;
}

std::string density_rows(double t, const GridDensity& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) s += csv_row({t, d.spec().node(0, i), d[i]});
  return s;
}

std::string holder_csv(const EstimateReport& fit, double p) {
  std::string s = "# holder-fit p=" + format_double(p);
  if (fit.degenerate) {
    s += " degenerate=true\n";
  } else {
    s += " log_c2=" + format_double(fit.details.value("intercept_log", std::log(fit.fitted_constant))) +
         " c2=" + format_double(fit.fitted_constant) + " delta=" + format_double(fit.exponent_fit.value_or(NAN)) + "\n";
  }
  s += "s,t,log_gap,log_distance\n";
  for (const auto& row : fit.samples.at("pairs")) {
    const double gap = row["gap"].get<double>();
    const double dist = row["distance"].get<double>();
    s += format_double(row["s"].get<double>()) + ',' + format_double(row["t"].get<double>()) + ',' +
         format_double(std::log(gap)) + ',' + (dist > 0.0 ? format_double(std::log(dist)) : std::string("-inf")) +
         '\n';
  }
  return s;
}

}  // namespace

fs::path emit_plot_data(const fs::path& run_dir, const std::string& kind) {
  if (std::find(kPlotKinds.begin(), kPlotKinds.end(), kind) == kPlotKinds.end()) {
    throw ValidationError("unknown plot kind '" + kind + "'");
  }
  auto manifest = read_json(run_dir / "manifest.json");
  const auto cfg = load_experiment(parse_config_text(manifest.at("config_text").get<std::string>()));
  const std::string& command = cfg.command;

  std::string csv;
  if (kind == "density-evolution") {
    csv = "t,x,density\n";
    if (command == "fp-solve") {
      const auto run = load_fp_states(run_dir);
      for (std::size_t k = 0; k < run.states.size(); ++k) csv += density_rows(run.times[k], run.states[k]);
    } else if (command == "simulate") {
      const MollifierFamily fam(1, cfg.sim.n_mollifier);
      for (const auto& snap : load_snapshots(run_dir)) {
        csv += density_rows(snap.time, density_snapshot(snap.cloud, fam, cfg.initial.grid()).density);
      }
    } else {
      throw ValidationError("density-evolution needs a simulate or fp-solve run");
    }
  } else if (kind == "holder-fit") {
    if (command == "simulate") {
      TrajectoryStore store;
      store.snapshots = load_snapshots(run_dir);
      store.particles = store.snapshots.front().cloud.size();
      csv = holder_csv(holder_time_fit(store, cfg.sim.p), cfg.sim.p);
    } else if (command == "fp-solve") {
      const auto run = load_fp_states(run_dir);
      const auto fit = holder_time_fit(run.times, cfg.sim.T, [&](std::size_t i, std::size_t j) {
        return wasserstein1_grid(run.states[i], run.states[j]);
      });
      csv = holder_csv(fit, 1.0);
    } else {
      throw ValidationError("holder-fit needs a simulate or fp-solve run");
    }
  } else if (kind == "convergence") {
    if (command != "converge") throw ValidationError("convergence plot data needs a converge run");
    const auto j = read_json(run_dir / "convergence.json");
    const auto n = j.at("n_values").get<std::vector<unsigned>>();
    const auto dist = j.at("cauchy_distances").get<std::vector<double>>();
    const auto floors = j.at("noise_floors").get<std::vector<double>>();
    csv = "n_low,n_high,sup_distance,noise_floor\n";
    for (std::size_t k = 0; k < dist.size(); ++k) {
      csv += csv_row({static_cast<double>(n[k]), static_cast<double>(n[k + 1]), dist[k], floors[k]});
    }
  } else {
    if (command != "stability") throw ValidationError("stability-ratio plot data needs a stability run");
    const auto j = read_json(run_dir / "stability.json");
    const double lambda = j.at("lambda_bound").get<double>();
    csv = "t,path,wtv,initial_wtv,lambda_bound,ratio\n";
    auto emit = [&](const std::string& path, const std::string& key, const std::string& initial_key) {
      if (!j.contains(initial_key) || j[initial_key].is_null()) return;
      const double initial = j[initial_key].get<double>();
      for (const auto& row : j.at("series")) {
        if (row[key].is_null()) continue;
        const double w = row[key].get<double>();
        csv += format_double(row["t"].get<double>()) + ',' + path + ',' + format_double(w) + ',' +
               format_double(initial) + ',' + format_double(lambda) + ',' + format_double(w / (lambda * initial)) +
               '\n';
      }
    };
    emit("fokker-planck", "wtv", "initial_wtv");
    emit("particle", "wtv_particle", "initial_wtv_particle");
  }

  const std::string rel = "plot/" + kind + ".csv";
  fs::create_directories(run_dir / "plot");
  write_file(run_dir / rel, csv);

  auto& files = manifest["files"];
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& f : files) {
    if (f["path"] != rel) kept.push_back(f);
  }
  kept.push_back({{"path", rel}, {"sha256", content_hash(csv)}, {"bytes", csv.size()}, {"origin", "plot-data"}});
  files = kept;
  write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
  return run_dir / rel;
}

}  // namespace mckv::app
