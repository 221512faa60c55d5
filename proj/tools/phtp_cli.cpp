#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "phtp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Minimum energy supply control of port-Hamiltonian systems and turnpike diagnostics"};
  app.require_subcommand(1);

  std::string run_config, verify_config, out_dir;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* run = app.add_subcommand("run", "solve every horizon of an experiment and write CSV/JSON results");
  run->add_option("config", run_config, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides [output] dir)");
  run->add_option("--jobs", jobs, "horizons solved in parallel")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run the structural and numerical self-checks");
  verify->add_option("config", verify_config, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string& path = run->parsed() ? run_config : verify_config;
  phtp::ExperimentConfig cfg;
  try {
    cfg = phtp::load_config(path);
  } catch (const phtp::ConfigError& e) {
    std::cerr << path << ": config error: " << e.what() << '\n';
    return 1;
  }

  if (run->parsed()) {
    std::optional<std::filesystem::path> out;
    if (!out_dir.empty()) out = out_dir;
    return phtp::run(cfg, out, jobs);
  }
  return phtp::verify(cfg);
}
