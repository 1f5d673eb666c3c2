#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/grid.hpp"
#include "mckv/particles.hpp"

namespace mckv::app {

/// A parse or schema error with the 1-based position it refers to.
class ConfigError : public ValidationError {
 public:
  ConfigError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
  std::size_t column = 0;      ///< column of the value
  std::size_t key_column = 0;
};

struct ConfigSection {
  std::string name;
  std::vector<ConfigEntry> entries;
  std::size_t line = 0;

  const ConfigEntry* find(std::string_view key) const;
};

/// Sectioned key = value text: `[section]` headers, `#` or `;` comments,
/// surrounding whitespace ignored. Sections and keys keep their order.
struct ConfigDocument {
  std::vector<ConfigSection> sections;

  const ConfigSection* find(std::string_view name) const;
  bool operator==(const ConfigDocument& other) const;
};

ConfigDocument parse_config_text(std::string_view text);
std::string serialize_config(const ConfigDocument& doc);

struct InitialSpec {
  std::string kind = "gaussian";  ///< gaussian | uniform | near-delta
  double mean = 0.0;
  double sd = 1.0;
  double a = 0.0;
  double b = 1.0;
  double lo = -8.0;
  double hi = 8.0;
  double dx = 0.01;

  GridSpec grid() const;
  GridDensity density() const;
};

struct FpSpec {
  double dt = 1e-3;
  int fixed_point_iterations = 1;
  bool duhamel = false;
};

struct StudySpec {
  std::vector<unsigned> n_values{4, 8, 16, 32};
  double translate = 0.1;
  bool particle_path = false;
  std::size_t samples = 10000;
  std::size_t noise_repeats = 0;
  std::vector<double> times;
};

inline const std::vector<std::string> kCommands = {"simulate", "fp-solve", "converge", "stability",
                                                   "check-assumptions", "transport-selftest"};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string scenario = "pure-diffusion";
  nlohmann::json scenario_parameters = nlohmann::json::object();
  InitialSpec initial;
  SimConfig sim;
  FpSpec fp;
  StudySpec study;
  std::filesystem::path output_dir = "mckv-out";
  std::set<std::string> formats{"csv", "json"};

  nlohmann::json to_json() const;
  ConfigDocument to_document() const;
};

/// Schema validation of a parsed document; errors point at the offending line.
ExperimentConfig load_experiment(const ConfigDocument& doc);
ExperimentConfig load_experiment_file(const std::filesystem::path& path);

}  // namespace mckv::app
