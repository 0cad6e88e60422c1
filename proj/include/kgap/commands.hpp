#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "kgap/config.hpp"

namespace kgap {

enum ExitCode : int
{
  exit_ok = 0,
  exit_config = 1,
  exit_audit = 2,
  exit_gate = 3
};

struct CommandOptions
{
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// --threads, then KINETIC_GAP_THREADS, then the config, then the hardware.
/// Throws ConfigError on a malformed environment value.
int resolve_threads(std::optional<int> cli, const char* env, std::optional<int> config);

int cmd_audit(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_constants(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log);
int cmd_spectrum(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log);
int cmd_decay(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log);

/// Loads the config, applies overrides and dispatches; never throws.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log,
                std::ostream& err);

}  // namespace kgap
