#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace mckv::app {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitRuntime = 2,
  kExitInconclusive = 3,
};

struct RunOptions {
  /// Takes precedence over MCKV_OUTPUT_DIR, which takes precedence over the config.
  std::optional<std::filesystem::path> output_dir;
  int threads = 0;  ///< 0 = leave the OpenMP default
};

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path output_dir;
  nlohmann::json manifest;
};

/// Parses, validates and executes one experiment. Writes the command's data
/// files, error.json on failure, and manifest.json last.
RunResult run_experiment(const std::string& config_text, const RunOptions& options = {});
RunResult run_experiment_file(const std::filesystem::path& config_path, const RunOptions& options = {});

/// Writes run_dir/plot/<kind>.csv from the artifacts of a finished run and
/// adds it to the manifest. Returns the written path.
std::filesystem::path emit_plot_data(const std::filesystem::path& run_dir, const std::string& kind);

inline const std::vector<std::string> kPlotKinds = {"density-evolution", "holder-fit", "convergence",
                                                    "stability-ratio"};

struct VerifyResult {
  std::vector<std::string> mismatched;
  std::vector<std::string> missing;
  std::size_t checked = 0;

  bool ok() const { return mismatched.empty() && missing.empty(); }
};

/// Re-hashes every file listed in run_dir/manifest.json.
VerifyResult verify_run(const std::filesystem::path& run_dir);

/// Oracle cross-checks of the transport routines; returns the report JSON
/// with a top-level "pass" flag.
nlohmann::json transport_selftest(std::uint64_t seed);

}  // namespace mckv::app
