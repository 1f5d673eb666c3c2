#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

#include "mckv/coefficients.hpp"
#include "mckv/io.hpp"

namespace mckv::app {

ConfigError::ConfigError(std::size_t line, std::size_t column, const std::string& message)
    : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

const ConfigEntry* ConfigSection::find(std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

const ConfigSection* ConfigDocument::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

bool ConfigDocument::operator==(const ConfigDocument& other) const {
  if (sections.size() != other.sections.size()) return false;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& a = sections[i];
    const auto& b = other.sections[i];
    if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
    for (std::size_t k = 0; k < a.entries.size(); ++k) {
      if (a.entries[k].key != b.entries[k].key || a.entries[k].value != b.entries[k].value) return false;
    }
  }
  return true;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Trims [begin, end) of `line`, returning the new begin offset and view.
std::pair<std::size_t, std::string_view> trim(std::string_view line, std::size_t begin, std::size_t end) {
  while (begin < end && is_space(line[begin])) ++begin;
  while (end > begin && is_space(line[end - 1])) --end;
  return {begin, line.substr(begin, end - begin)};
}

bool valid_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

ConfigDocument parse_config_text(std::string_view text) {
  ConfigDocument doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;

    // Comments: whole-line, or introduced by whitespace followed by # or ;.
    std::size_t end = line.size();
    for (std::size_t k = 0; k < line.size(); ++k) {
      if ((line[k] == '#' || line[k] == ';') && (k == 0 || is_space(line[k - 1]))) {
        end = k;
        break;
      }
    }
    const auto [start, body] = trim(line, 0, end);
    if (body.empty()) {
      if (eol == text.size()) break;
      continue;
    }

    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(line_no, start + 1, "section header is missing ']'");
      const auto [name_start, name] = trim(line, start + 1, start + body.size() - 1);
      if (!valid_name(name)) throw ConfigError(line_no, name_start + 1, "invalid section name");
      if (doc.find(name)) throw ConfigError(line_no, name_start + 1, "duplicate section [" + std::string(name) + "]");
      doc.sections.push_back({std::string(name), {}, line_no});
    } else {
      const std::size_t eq = line.find('=', start);
      if (eq == std::string_view::npos || eq >= end) throw ConfigError(line_no, start + 1, "expected 'key = value'");
      if (doc.sections.empty()) throw ConfigError(line_no, start + 1, "entry before the first [section]");
      const auto [key_start, key] = trim(line, start, eq);
      if (!valid_name(key)) throw ConfigError(line_no, key_start + 1, "invalid key");
      auto& section = doc.sections.back();
      if (section.find(key)) {
        throw ConfigError(line_no, key_start + 1, "duplicate key '" + std::string(key) + "' in [" + section.name + "]");
      }
      const auto [value_start, value] = trim(line, eq + 1, end);
      section.entries.push_back({std::string(key), std::string(value), line_no, value_start + 1, key_start + 1});
    }
    if (eol == text.size()) break;
  }
  return doc;
}

std::string serialize_config(const ConfigDocument& doc) {
  std::string out;
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    if (i > 0) out += '\n';
    out += '[' + doc.sections[i].name + "]\n";
    for (const auto& e : doc.sections[i].entries) out += e.key + " = " + e.value + '\n';
  }
  return out;
}

GridSpec InitialSpec::grid() const { return GridSpec::uniform_1d(lo, hi, dx); }

GridDensity InitialSpec::density() const {
  const GridSpec g = grid();
  if (kind == "gaussian") return GridDensity::gaussian_1d(g, mean, sd);
  if (kind == "near-delta") return GridDensity::gaussian_1d(g, mean, 3.0 * g.cell_width[0]);
  if (kind == "uniform") return GridDensity::uniform_1d(g, a, b);
  throw ValidationError("unknown initial density kind '" + kind + "'");
}

namespace {

// Typed readers that report the entry's position on failure.
struct Reader {
  const ConfigEntry& e;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(e.line, e.column, what); }

  double real() const {
    try {
      return parse_double(e.value);
    } catch (const ValidationError&) {
      fail("'" + e.key + "' expects a number, got '" + e.value + "'");
    }
  }
  double positive() const {
    const double v = real();
    if (!(v > 0.0)) fail("'" + e.key + "' must be positive");
    return v;
  }
  std::uint64_t integer() const {
    std::uint64_t v = 0;
    const auto r = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (r.ec != std::errc{} || r.ptr != e.value.data() + e.value.size()) {
      fail("'" + e.key + "' expects a nonnegative integer, got '" + e.value + "'");
    }
    return v;
  }
  bool boolean() const {
    if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "0") return false;
    fail("'" + e.key + "' expects true or false, got '" + e.value + "'");
  }
  std::vector<std::string> items() const {
    std::vector<std::string> out;
    if (e.value.empty()) return out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto [s, v] = trim(item, 0, item.size());
      (void)s;
      if (v.empty()) fail("'" + e.key + "' has an empty list item");
      out.emplace_back(v);
    }
    return out;
  }
  std::vector<double> reals() const {
    std::vector<double> out;
    for (const auto& s : items()) {
      try {
        out.push_back(parse_double(s));
      } catch (const ValidationError&) {
        fail("'" + e.key + "' expects a comma-separated list of numbers, got '" + s + "'");
      }
    }
    return out;
  }
  std::vector<unsigned> counts() const {
    std::vector<unsigned> out;
    for (const auto& s : items()) {
      unsigned v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        fail("'" + e.key + "' expects a comma-separated list of integers, got '" + s + "'");
      }
      out.push_back(v);
    }
    return out;
  }
};

const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"experiment", {"command", "seed"}},
      {"scenario", {"name", "dim", "c", "epsilon"}},
      {"initial", {"kind", "mean", "sd", "a", "b", "lo", "hi", "dx"}},
      {"sim", {"N", "T", "dt", "n", "snapshot_times", "p", "dense", "kde", "wall_budget"}},
      {"fp", {"dt", "fixed_point_iterations", "duhamel"}},
      {"study", {"n_values", "translate", "particle_path", "samples", "noise_repeats", "times"}},
      {"output", {"dir", "formats"}},
  };
  return s;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

std::string join(const std::vector<unsigned>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

ExperimentConfig load_experiment(const ConfigDocument& doc) {
  for (const auto& section : doc.sections) {
    const auto it = schema().find(section.name);
    if (it == schema().end()) throw ConfigError(section.line, 1, "unknown section [" + section.name + "]");
    for (const auto& e : section.entries) {
      if (std::find(it->second.begin(), it->second.end(), e.key) == it->second.end()) {
        throw ConfigError(e.line, e.key_column, "unknown key '" + e.key + "' in [" + section.name + "]");
      }
    }
  }

  ExperimentConfig c;
  const auto* experiment = doc.find("experiment");
  if (!experiment || !experiment->find("command")) {
    throw ConfigError(experiment ? experiment->line : 1, 1, "[experiment] must set 'command'");
  }
  for (const auto& e : experiment->entries) {
    const Reader r{e};
    if (e.key == "command") {
      if (std::find(kCommands.begin(), kCommands.end(), e.value) == kCommands.end()) {
        r.fail("unknown command '" + e.value + "'");
      }
      c.command = e.value;
    } else if (e.key == "seed") {
      c.seed = r.integer();
    }
  }

  std::size_t dim = 1;
  if (const auto* s = doc.find("scenario")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "name") {
        const auto names = scenario_names();
        if (std::find(names.begin(), names.end(), e.value) == names.end()) r.fail("unknown scenario '" + e.value + "'");
        c.scenario = e.value;
      } else if (e.key == "dim") {
        dim = r.integer();
        if (dim < 1 || dim > 16) r.fail("'dim' must be in [1, 16]");
        c.scenario_parameters["dim"] = dim;
      } else if (e.key == "c") {
        const auto v = r.reals();
        if (v.empty()) r.fail("'c' needs at least one number");
        c.scenario_parameters["c"] = v.size() == 1 ? nlohmann::json(v[0]) : nlohmann::json(v);
      } else if (e.key == "epsilon") {
        const double eps = r.real();
        if (!(eps >= 0.0)) r.fail("'epsilon' must be >= 0");
        c.scenario_parameters["epsilon"] = eps;
      }
    }
  }

  if (const auto* s = doc.find("initial")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "kind") {
        if (e.value != "gaussian" && e.value != "uniform" && e.value != "near-delta") {
          r.fail("'kind' must be gaussian, uniform or near-delta");
        }
        c.initial.kind = e.value;
      } else if (e.key == "mean") c.initial.mean = r.real();
      else if (e.key == "sd") c.initial.sd = r.positive();
      else if (e.key == "a") c.initial.a = r.real();
      else if (e.key == "b") c.initial.b = r.real();
      else if (e.key == "lo") c.initial.lo = r.real();
      else if (e.key == "hi") c.initial.hi = r.real();
      else if (e.key == "dx") c.initial.dx = r.positive();
    }
    if (!(c.initial.hi > c.initial.lo)) throw ConfigError(s->line, 1, "[initial] needs lo < hi");
    if (c.initial.kind == "uniform" && !(c.initial.b > c.initial.a)) throw ConfigError(s->line, 1, "[initial] needs a < b");
  }

  c.sim.dim = dim;
  bool snapshots_given = false;
  if (const auto* s = doc.find("sim")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "N") {
        c.sim.N = r.integer();
        if (c.sim.N == 0) r.fail("'N' must be positive");
      } else if (e.key == "T") {
        c.sim.T = r.real();
        if (!(c.sim.T >= 0.0)) r.fail("'T' must be >= 0");
      } else if (e.key == "dt") c.sim.dt = r.positive();
      else if (e.key == "n") {
        const auto n = r.integer();
        if (n == 0 || n > 100000) r.fail("'n' must be in [1, 100000]");
        c.sim.n_mollifier = static_cast<unsigned>(n);
      } else if (e.key == "snapshot_times") {
        c.sim.snapshot_times = r.reals();
        snapshots_given = true;
      }
      else if (e.key == "p") {
        c.sim.p = r.real();
        if (!(c.sim.p >= 1.0)) r.fail("'p' must be >= 1");
      } else if (e.key == "dense") c.sim.dense = r.boolean();
      else if (e.key == "kde") {
        if (e.value != "exact" && e.value != "binned") r.fail("'kde' must be exact or binned");
        c.sim.kde = kde_method_from_string(e.value);
      } else if (e.key == "wall_budget") {
        c.sim.wall_budget_seconds = r.real();
        if (!(c.sim.wall_budget_seconds >= 0.0)) r.fail("'wall_budget' must be >= 0");
      }
    }
  }
  if (const auto* s = doc.find("fp")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "dt") c.fp.dt = r.positive();
      else if (e.key == "fixed_point_iterations") {
        const auto k = r.integer();
        if (k < 1 || k > 1000) r.fail("'fixed_point_iterations' must be in [1, 1000]");
        c.fp.fixed_point_iterations = static_cast<int>(k);
      } else if (e.key == "duhamel") c.fp.duhamel = r.boolean();
    }
  }

  c.sim.seed = c.seed;
  // The Fokker-Planck solve steps with the fp dt; snapshot times must divide it.
  if (c.command == "fp-solve") c.sim.dt = c.fp.dt;
  if (!snapshots_given) c.sim.snapshot_times = {c.sim.T};
  try {
    c.sim.validate();
  } catch (const ValidationError& e) {
    const auto* s = doc.find("sim");
    throw ConfigError(s ? s->line : 1, 1, e.what());
  }

  if (const auto* s = doc.find("study")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "n_values") {
        c.study.n_values = r.counts();
        if (c.study.n_values.size() < 3) r.fail("'n_values' needs at least three entries");
        for (std::size_t k = 1; k < c.study.n_values.size(); ++k) {
          if (c.study.n_values[k] <= c.study.n_values[k - 1]) r.fail("'n_values' must increase strictly");
        }
        if (c.study.n_values.front() == 0) r.fail("'n_values' must be positive");
      } else if (e.key == "translate") c.study.translate = r.real();
      else if (e.key == "particle_path") c.study.particle_path = r.boolean();
      else if (e.key == "samples") {
        c.study.samples = r.integer();
        if (c.study.samples == 0) r.fail("'samples' must be positive");
      } else if (e.key == "noise_repeats") c.study.noise_repeats = r.integer();
      else if (e.key == "times") c.study.times = r.reals();
    }
  }

  if (const auto* s = doc.find("output")) {
    for (const auto& e : s->entries) {
      const Reader r{e};
      if (e.key == "dir") {
        if (e.value.empty()) r.fail("'dir' must not be empty");
        c.output_dir = e.value;
      } else if (e.key == "formats") {
        c.formats.clear();
        for (const auto& f : r.items()) {
          if (f != "csv" && f != "json") r.fail("'formats' accepts csv and json");
          c.formats.insert(f);
        }
        if (c.formats.empty()) r.fail("'formats' must name at least one format");
      }
    }
  }

  if (dim != 1 && c.command != "check-assumptions" && c.command != "transport-selftest" && c.command != "simulate") {
    throw ConfigError(doc.find("scenario")->line, 1, "command '" + c.command + "' supports dim = 1 only");
  }
  if (dim != 1 && c.command == "simulate") {
    throw ConfigError(doc.find("scenario")->line, 1, "the configurable initial laws are one-dimensional");
  }
  return c;
}

ExperimentConfig load_experiment_file(const std::filesystem::path& path) {
  return load_experiment(parse_config_text(read_file(path)));
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"command", command},
          {"seed", seed},
          {"scenario", {{"name", scenario}, {"parameters", scenario_parameters}}},
          {"initial",
           {{"kind", initial.kind}, {"mean", initial.mean}, {"sd", initial.sd}, {"a", initial.a}, {"b", initial.b},
            {"lo", initial.lo}, {"hi", initial.hi}, {"dx", initial.dx}}},
          {"sim", sim.to_json()},
          {"fp", {{"dt", fp.dt}, {"fixed_point_iterations", fp.fixed_point_iterations}, {"duhamel", fp.duhamel}}},
          {"study",
           {{"n_values", study.n_values}, {"translate", study.translate}, {"particle_path", study.particle_path},
            {"samples", study.samples}, {"noise_repeats", study.noise_repeats}, {"times", study.times}}},
          {"output", {{"dir", output_dir.generic_string()}, {"formats", formats}}}};
}

ConfigDocument ExperimentConfig::to_document() const {
  ConfigDocument doc;
  auto section = [&](const std::string& name, std::vector<std::pair<std::string, std::string>> kv) {
    ConfigSection s{name, {}, 0};
    for (auto& [k, v] : kv) s.entries.push_back({k, v, 0, 0, 0});
    doc.sections.push_back(std::move(s));
  };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  section("experiment", {{"command", command}, {"seed", std::to_string(seed)}});
  std::vector<std::pair<std::string, std::string>> scen{{"name", scenario}};
  if (scenario_parameters.contains("dim")) scen.emplace_back("dim", std::to_string(scenario_parameters["dim"].get<int>()));
  if (scenario_parameters.contains("c")) {
    const auto& jc = scenario_parameters["c"];
    scen.emplace_back("c", jc.is_array() ? join(jc.get<std::vector<double>>()) : format_double(jc.get<double>()));
  }
  if (scenario_parameters.contains("epsilon")) scen.emplace_back("epsilon", format_double(scenario_parameters["epsilon"].get<double>()));
  section("scenario", scen);
  section("initial", {{"kind", initial.kind}, {"mean", format_double(initial.mean)}, {"sd", format_double(initial.sd)},
                      {"a", format_double(initial.a)}, {"b", format_double(initial.b)}, {"lo", format_double(initial.lo)},
                      {"hi", format_double(initial.hi)}, {"dx", format_double(initial.dx)}});
  section("sim", {{"N", std::to_string(sim.N)}, {"T", format_double(sim.T)}, {"dt", format_double(sim.dt)},
                  {"n", std::to_string(sim.n_mollifier)}, {"snapshot_times", join(sim.snapshot_times)},
                  {"p", format_double(sim.p)}, {"dense", flag(sim.dense)}, {"kde", to_string(sim.kde)},
                  {"wall_budget", format_double(sim.wall_budget_seconds)}});
  section("fp", {{"dt", format_double(fp.dt)}, {"fixed_point_iterations", std::to_string(fp.fixed_point_iterations)},
                 {"duhamel", flag(fp.duhamel)}});
  section("study", {{"n_values", join(study.n_values)}, {"translate", format_double(study.translate)},
                    {"particle_path", flag(study.particle_path)}, {"samples", std::to_string(study.samples)},
                    {"noise_repeats", std::to_string(study.noise_repeats)}, {"times", join(study.times)}});
  std::string fmts;
  for (const auto& f : formats) fmts += (fmts.empty() ? "" : ", ") + f;
  section("output", {{"dir", output_dir.generic_string()}, {"formats", fmts}});
  return doc;
}

}  // namespace mckv::app
