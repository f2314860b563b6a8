#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "donutrd/app/commands.hpp"

namespace app = donutrd::app;

int main(int argc, char** argv) {
  CLI::App cli{"Donut fuzzy regression discontinuity with honest intervals"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", app::kToolVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool print_config = false;

  const char* names[] = {"simulate", "estimate", "diagnose", "elasticity", "report"};
  const char* help[] = {
      "simulate a cohort; writes cohort.csv and the true estimands",
      "specification grid: first stage, sharp and fuzzy fits, point elasticity",
      "placebo thresholds, bandwidth sweep, covariate balance, plot data",
      "elasticity with a percentile bootstrap interval",
      "estimate + diagnose + elasticity, with summary.txt"};
  for (int k = 0; k < 5; ++k) {
    CLI::App* sub = cli.add_subcommand(names[k], help[k]);
    sub->add_option("--config,-c", config_path, "TOML run configuration");
    sub->add_option("--out,-o", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_flag("--quiet,-q", quiet, "no progress output");
  }
  cli.add_subcommand("default-config", "print the default configuration")
      ->callback([&] { print_config = true; });

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : app::kExitUsage;
  }
  if (print_config) {
    std::cout << app::default_config_text();
    return app::kExitOk;
  }

  const std::string name = cli.get_subcommands().front()->get_name();
  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    app::RunConfig cfg = config_path.empty()
                             ? app::parse_config(app::default_config_text())
                             : app::load_config(config_path);
    if (seed) cfg.set_seed(*seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return app::run_command(app::parse_command(name), cfg, log);
  } catch (const donutrd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return app::kExitUsage;
  }
}
