#include "mckv/particles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "mckv/error.hpp"
#include "mckv/io.hpp"
#include "mckv/rng.hpp"
#include "mckv/summation.hpp"

namespace mckv {

void ParticleCloud::validate() const {
  if (dim == 0) throw ValidationError("particle cloud dimension must be positive");
  if (positions.empty() || positions.size() % dim != 0) {
    throw ValidationError("particle cloud needs at least one particle and a whole number of coordinates");
  }
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (!std::isfinite(positions[k])) {
      throw NumericalError("particle " + std::to_string(k / dim) + " has a non-finite coordinate");
    }
  }
}

std::string to_string(KdeMethod method) { return method == KdeMethod::exact ? "exact" : "binned"; }

KdeMethod kde_method_from_string(const std::string& text) {
  if (text == "exact") return KdeMethod::exact;
  if (text == "binned") return KdeMethod::binned;
  throw ValidationError("kde method must be 'exact' or 'binned', got '" + text + "'");
}

std::size_t SimConfig::steps() const {
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

std::vector<double> SimConfig::recorded_times() const {
  std::vector<double> times = snapshot_times;
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

void SimConfig::validate() const {
  if (N == 0) throw ValidationError("sim: N must be positive");
  if (dim == 0) throw ValidationError("sim: dimension must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sim: dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("sim: T must be nonnegative");
  if (n_mollifier == 0) throw ValidationError("sim: mollifier index n must be positive");
  if (!(p >= 1.0)) throw ValidationError("sim: Wasserstein order p must be >= 1");
  if (wall_budget_seconds < 0.0) throw ValidationError("sim: wall budget must be nonnegative");
  const double blocks = static_cast<double>(steps() + 1) * static_cast<double>((dim + 1) / 2);
  if (blocks >= 4294967296.0) throw ValidationError("sim: too many steps for the noise counter space");
  for (double t : snapshot_times) {
    if (!(t >= 0.0) || t > T * (1.0 + 1e-12) + 1e-12) {
      throw ValidationError("sim: snapshot time " + format_double(t) + " outside [0, T]");
    }
    const double k = std::round(t / dt);
    if (std::abs(k * dt - t) > 1e-12 * std::max(1.0, t)) {
      throw ValidationError("sim: snapshot time " + format_double(t) + " is not a multiple of dt");
    }
  }
}

nlohmann::json SimConfig::to_json() const {
  return {{"N", N},
          {"dim", dim},
          {"T", T},
          {"dt", dt},
          {"n_mollifier", n_mollifier},
          {"seed", seed},
          {"snapshot_times", snapshot_times},
          {"p", p},
          {"dense", dense},
          {"kde", to_string(kde)},
          {"wall_budget_seconds", wall_budget_seconds}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig c;
  c.N = j.at("N").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.T = j.at("T").get<double>();
  c.dt = j.at("dt").get<double>();
  c.n_mollifier = j.at("n_mollifier").get<unsigned>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.snapshot_times = j.at("snapshot_times").get<std::vector<double>>();
  c.p = j.at("p").get<double>();
  c.dense = j.at("dense").get<bool>();
  c.kde = kde_method_from_string(j.at("kde").get<std::string>());
  c.wall_budget_seconds = j.value("wall_budget_seconds", 0.0);
  return c;
}

const Snapshot& TrajectoryStore::at_time(double t) const {
  for (const auto& s : snapshots) {
    if (std::abs(s.time - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
  }
  throw ValidationError("no snapshot at t = " + format_double(t));
}

void TrajectoryStore::validate() const {
  if (snapshots.empty() || snapshots.front().time != 0.0) {
    throw ValidationError("trajectory store must start with a snapshot at t = 0");
  }
  for (std::size_t k = 1; k < snapshots.size(); ++k) {
    if (!(snapshots[k].time > snapshots[k - 1].time)) {
      throw ValidationError("trajectory snapshot times must be strictly increasing");
    }
  }
  for (const auto& s : snapshots) s.cloud.validate();
}

std::string TrajectoryStore::content_hash() const {
  std::string bytes;
  auto append = [&](std::span<const double> v) {
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  };
  for (const auto& s : snapshots) {
    append(std::span<const double>(&s.time, 1));
    append(s.cloud.positions);
  }
  append(dense_times);
  append(dense_positions);
  bytes += metadata.dump();
  return mckv::content_hash(bytes);
}

ParticleCloud sample_initial(const GridDensity& l_nu, std::size_t N, std::uint64_t seed) {
  const GridSpec& spec = l_nu.spec();
  l_nu.validate();
  if (N == 0) throw ValidationError("sample_initial: N must be positive");
  const double mass = l_nu.mass();
  if (!(mass > 0.0)) throw ValidationError("sample_initial: initial density has zero mass");
  if (std::abs(mass - 1.0) > 1e-6) {
    throw ValidationError("sample_initial: initial density integrates to " + format_double(mass) + ", not 1");
  }

  ParticleCloud cloud;
  cloud.dim = spec.dim();
  cloud.positions.resize(N * cloud.dim);

  if (cloud.dim == 1) {
    const std::size_t m = l_nu.size();
    std::vector<double> cumulative(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) cumulative[k + 1] = cumulative[k] + l_nu[k];
    const double total = cumulative[m];
    const double h = spec.cell_width[0];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(N); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const double u = CounterStream(seed, i, StreamPurpose::kInitial).uniforms(0)[0] * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      std::size_t k = static_cast<std::size_t>(it - cumulative.begin());
      k = std::clamp<std::size_t>(k, 1, m) - 1;
      while (l_nu[k] <= 0.0 && k + 1 < m) ++k;  // never land in an empty cell
      const double frac = std::clamp((u - cumulative[k]) / l_nu[k], 0.0, 1.0);
      cloud.positions[i] = spec.origin[0] + (static_cast<double>(k) + frac) * h;
    }
    return cloud;
  }

  const double ceiling = l_nu.sup_norm();
  const std::size_t dim = cloud.dim;
  std::vector<char> failed(N, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(N); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const CounterStream rng(seed, i, StreamPurpose::kInitial);
    std::vector<double> x(dim);
    std::uint64_t block = 0;
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < 1000000 && !accepted; ++attempt) {
      for (std::size_t a = 0; a < dim; a += 2) {
        const auto u = rng.uniforms(block++);
        x[a] = spec.lower(a) + u[0] * (spec.upper(a) - spec.lower(a));
        if (a + 1 < dim) x[a + 1] = spec.lower(a + 1) + u[1] * (spec.upper(a + 1) - spec.lower(a + 1));
      }
      const double v = rng.uniforms(block++)[0] * ceiling;
      accepted = v < l_nu.at(x);
    }
    failed[i] = !accepted;
    std::copy(x.begin(), x.end(), cloud.positions.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  if (std::find(failed.begin(), failed.end(), 1) != failed.end()) {
    throw NumericalError("sample_initial: rejection sampling did not terminate");
  }
  return cloud;
}

void fill_noise(std::uint64_t seed, std::size_t step, std::size_t N, std::size_t m, std::span<double> out) {
  if (out.size() != N * m) throw ValidationError("fill_noise: output has the wrong size");
  const std::size_t blocks = (m + 1) / 2;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(N); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const CounterStream rng(seed, i, StreamPurpose::kNoise);
    for (std::size_t b = 0; b < blocks; ++b) {
      const auto z = rng.normals(step * blocks + b);
      out[i * m + 2 * b] = z[0];
      if (2 * b + 1 < m) out[i * m + 2 * b + 1] = z[1];
    }
  }
}

ParticleCloud em_step(const ParticleCloud& cloud, const CoefficientSet& cs, const MollifierFamily& fam,
                      double dt, std::span<const double> noise, KdeMethod method) {
  const std::size_t N = cloud.size();
  const std::size_t d = cloud.dim;
  const std::size_t m = cs.noise_dim;
  if (N == 0) throw ValidationError("em_step: empty cloud");
  if (d != cs.dim || d != fam.dim()) throw ValidationError("em_step: dimension mismatch");
  if (noise.size() != N * m) {
    throw ValidationError("em_step: noise must hold N x m = " + std::to_string(N * m) + " draws, got " +
                          std::to_string(noise.size()));
  }
  if (!(dt >= 0.0)) throw ValidationError("em_step: dt must be nonnegative");

  // Freeze the pre-step law. In 1-D the measure and the binned KDE read a
  // position-sorted copy so that relabelling particles cannot change a bit.
  const bool needs_law = cs.drift_reads_density || cs.drift_reads_measure || cs.diffusion_reads_measure;
  std::vector<double> canonical;
  if (needs_law && d == 1) {
    canonical = cloud.positions;
    std::sort(canonical.begin(), canonical.end());
  }
  const MeasureView law(d, canonical.empty() ? std::span<const double>(cloud.positions) : canonical);

  std::vector<double> r(N, 0.0);
  if (cs.drift_reads_density) {
    if (method == KdeMethod::binned && d == 1) {
      const BinnedKde kde(canonical, fam);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) {
        r[static_cast<std::size_t>(i)] = kde.at(cloud.positions[static_cast<std::size_t>(i)]);
      }
    } else {
      const KdeIndex kde(cloud, fam);
#pragma omp parallel for schedule(dynamic, 256)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) {
        r[static_cast<std::size_t>(i)] = kde.at(cloud.particle(static_cast<std::size_t>(i)));
      }
    }
  }

  ParticleCloud next;
  next.dim = d;
  next.time = cloud.time + dt;
  next.positions.resize(cloud.positions.size());
  const double sqrt_dt = std::sqrt(dt);
  const double t = cloud.time;

#pragma omp parallel
  {
    std::vector<double> b(d);
    std::vector<double> sigma(d * m);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(N); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const auto x = cloud.particle(i);
      cs.drift(t, x, r[i], law, b);
      cs.diffusion(t, x, law, sigma);
      for (std::size_t a = 0; a < d; ++a) {
        double kick = 0.0;
        for (std::size_t k = 0; k < m; ++k) kick += sigma[a * m + k] * noise[i * m + k];
        next.positions[i * d + a] = x[a] + b[a] * dt + kick * sqrt_dt;
      }
    }
  }

  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      if (!std::isfinite(next.positions[i * d + a])) {
        std::string state;
        for (std::size_t c = 0; c < d; ++c) state += (c ? "," : "") + format_double(cloud.positions[i * d + c]);
        throw NumericalError("em_step: non-finite update for particle " + std::to_string(i) + " at t=" +
                             format_double(t) + " from position (" + state + "), r=" + format_double(r[i]));
      }
    }
  }
  return next;
}

TrajectoryStore simulate(const SimConfig& config, const CoefficientSet& cs, const GridDensity& l_nu,
                         const StepObserver& observer) {
  config.validate();
  cs.validate();
  if (cs.dim != config.dim || l_nu.spec().dim() != config.dim) {
    throw ValidationError("simulate: config, coefficients and initial density disagree on the dimension");
  }
  const auto started = std::chrono::steady_clock::now();
  const MollifierFamily fam(config.dim, config.n_mollifier);
  const std::size_t steps = config.steps();
  const std::vector<double> times = config.recorded_times();

  TrajectoryStore store;
  store.particles = config.N;
  store.dim = config.dim;
  store.metadata = {{"config", config.to_json()},
                    {"coefficients", cs.descriptor()},
                    {"kernel", {{"profile", fam.base().name()}, {"n", fam.n()}}},
                    {"initial_density_hash", content_hash(l_nu.values())},
                    {"steps", steps}};

  ParticleCloud cloud = sample_initial(l_nu, config.N, config.seed);
  cloud.time = 0.0;
  std::size_t next_snapshot = 0;
  auto record = [&](std::size_t k) {
    while (next_snapshot < times.size() && std::llround(times[next_snapshot] / config.dt) == static_cast<long long>(k)) {
      Snapshot s{times[next_snapshot], cloud};
      s.cloud.time = times[next_snapshot];
      store.snapshots.push_back(std::move(s));
      ++next_snapshot;
    }
    if (config.dense) {
      store.dense_times.push_back(cloud.time);
      store.dense_positions.insert(store.dense_positions.end(), cloud.positions.begin(), cloud.positions.end());
    }
  };
  record(0);

  std::vector<double> noise(config.N * cs.noise_dim);
  for (std::size_t k = 0; k < steps; ++k) {
    fill_noise(config.seed, k, config.N, cs.noise_dim, noise);
    cloud = em_step(cloud, cs, fam, config.dt, noise, config.kde);
    cloud.time = static_cast<double>(k + 1) * config.dt;
    record(k + 1);
    if (observer) observer(cloud);
    if (config.wall_budget_seconds > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
      if (elapsed.count() > config.wall_budget_seconds && k + 1 < steps) {
        store.complete = false;
        store.metadata["stopped_at_step"] = k + 1;
        break;
      }
    }
  }
  store.metadata["complete"] = store.complete;
  return store;
}

void write_snapshot_csv(std::ostream& out, const Snapshot& snapshot) {
  out << "t,particle";
  for (std::size_t a = 0; a < snapshot.cloud.dim; ++a) out << ",x" << a;
  out << '\n';
  const std::string t = format_double(snapshot.time);
  for (std::size_t i = 0; i < snapshot.cloud.size(); ++i) {
    out << t << ',' << i;
    for (double c : snapshot.cloud.particle(i)) out << ',' << format_double(c);
    out << '\n';
  }
}

Snapshot read_snapshot_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("snapshot csv: empty input");
  const auto header = split_csv_record(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "particle") {
    throw ValidationError("snapshot csv: header must be t,particle,x0,...");
  }
  Snapshot s;
  s.cloud.dim = header.size() - 2;
  std::size_t row = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != header.size()) {
      throw ValidationError("snapshot csv: row " + std::to_string(row) + " has wrong field count");
    }
    const double t = parse_double(fields[0]);
    if (first) {
      s.time = t;
      first = false;
    }
    for (std::size_t a = 0; a < s.cloud.dim; ++a) s.cloud.positions.push_back(parse_double(fields[2 + a]));
  }
  s.cloud.time = s.time;
  return s;
}

}  // namespace mckv
