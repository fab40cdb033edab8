// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "ringmaster/error.hpp"

int main(int argc, char** argv) {
  using namespace ringmaster;
  CLI::App app{"Asynchronous LMO optimizer simulator and time-bound calculator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* sub, bool outputs) {
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    if (outputs) {
      sub->add_option("--seed", seed, "master seed (overrides the config)");
      sub->add_option("--out", out_dir, "output directory (default: config output_dir, $RINGMASTER_OUT_DIR, .)");
    }
  };
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one configuration, write trace CSV and summary JSON");
  CLI::App* grid_cmd = app.add_subcommand("grid", "simulate every eta x R x B combination and rank by final loss");
  CLI::App* bounds_cmd = app.add_subcommand("bounds", "print schedules and time bounds");
  add_common(run_cmd, true);
  add_common(grid_cmd, true);
  add_common(bounds_cmd, false);

  CLI11_PARSE(app, argc, argv);

  cli::ExperimentConfig cfg;
  try {
    cfg = cli::load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (seed) cfg.seed = *seed;

  if (*run_cmd) return cli::cmd_run(cfg, cli::resolve_output_dir(out_dir, cfg), std::cout, std::cerr);
  if (*grid_cmd) return cli::cmd_grid(cfg, cli::resolve_output_dir(out_dir, cfg), std::cout, std::cerr);
  return cli::cmd_bounds(cfg, std::cout, std::cerr);
}
