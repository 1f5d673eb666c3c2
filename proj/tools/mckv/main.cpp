#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "app.hpp"
#include "mckv/io.hpp"

using namespace mckv::app;

int main(int argc, char** argv) {
  CLI::App cli{"Mollified McKean-Vlasov particle and Fokker-Planck experiments"};
  cli.set_version_flag("--version", kVersion);
  cli.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  const std::map<std::string, std::string> descriptions{
      {"simulate", "run the mollified particle system"},
      {"fp-solve", "solve the limit Fokker-Planck equation"},
      {"converge", "Cauchy distances across mollifier indices"},
      {"stability", "compare runs from an initial law and its translate"},
      {"check-assumptions", "randomly test the coefficient assumptions"},
      {"transport-selftest", "cross-check the Wasserstein solvers"},
  };
  for (const auto& name : kCommands) {
    auto* sub = cli.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "overrides [output] dir and MCKV_OUTPUT_DIR");
    sub->add_option("--threads", threads, "OpenMP thread count")->check(CLI::PositiveNumber);
  }

  std::string run_dir;
  std::string kind;
  auto* plot = cli.add_subcommand("plot-data", "write tidy CSV for plotting from a finished run");
  plot->add_option("--run-dir", run_dir)->required()->check(CLI::ExistingDirectory);
  plot->add_option("--kind", kind)->required()->check(CLI::IsMember(kPlotKinds));
  auto* verify = cli.add_subcommand("verify", "re-hash the files listed in a run manifest");
  verify->add_option("--run-dir", run_dir)->required()->check(CLI::ExistingDirectory);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (plot->parsed()) {
      std::cout << emit_plot_data(run_dir, kind).string() << "\n";
      return kExitOk;
    }
    if (verify->parsed()) {
      const auto r = verify_run(run_dir);
      for (const auto& f : r.missing) std::cerr << "missing: " << f << "\n";
      for (const auto& f : r.mismatched) std::cerr << "hash mismatch: " << f << "\n";
      std::cout << r.checked << " files checked, " << (r.ok() ? "all hashes match" : "verification FAILED") << "\n";
      return r.ok() ? kExitOk : kExitValidation;
    }
    RunOptions options;
    if (!output_dir.empty()) options.output_dir = output_dir;
    options.threads = threads;
    const auto result = run_experiment_file(config_path, options);
    if (result.exit_code != kExitOk) {
      std::cerr << "mckv: " << mckv::read_file(result.output_dir / "error.json");
    }
    std::cout << (result.output_dir / "manifest.json").string() << "\n";
    return result.exit_code;
  } catch (const mckv::ValidationError& e) {
    std::cerr << "mckv: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "mckv: " << e.what() << "\n";
    return kExitRuntime;
  }
}
