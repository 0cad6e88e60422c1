#include <CLI11.hpp>

#include <iostream>

#include "kgap/commands.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"Linearized multi-species Boltzmann toolkit"};
  app.require_subcommand(1);
  kgap::CommandOptions options;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  for (const char* name : {"audit", "constants", "spectrum", "decay"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "JSON run configuration")->required();
    sub->add_option("--out", options.out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "overrides budgets.seed");
    sub->add_option("--threads", threads, "worker threads (fallback: KINETIC_GAP_THREADS)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kgap::exit_config;
  }
  options.seed = seed;
  options.threads = threads;
  const std::string command = app.get_subcommands().front()->get_name();
  return kgap::run_command(command, options, std::cout, std::cerr);
}
