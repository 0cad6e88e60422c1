#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgap/evolution.hpp"
#include "kgap/galerkin.hpp"
#include "kgap/kernels.hpp"
#include "kgap/mixture.hpp"

namespace kgap {

inline constexpr int schema_version = 1;

/// Malformed or out-of-range configuration (exit status 1).
class ConfigError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

struct Budgets
{
  std::size_t mc_samples = 100000;
  std::size_t samples = 1000;        // random states for ledgers, holdouts and verification
  std::size_t audit_samples = 1000;
  std::uint64_t seed = 1;
};

enum class Observable
{
  h1_distance,
  G
};

struct DecayOptions
{
  double t_end = 25.0;
  double dt = 0.1;
  Scheme scheme = Scheme::expm;
  bool allow_stiff = false;
  int record_every = 1;
  double transient = 0.2;
  Observable observable = Observable::h1_distance;
  InitialKind initial = InitialKind::random_perturbation;
  double amplitude = 1.0;
};

struct RunConfig
{
  Mixture mixture{{1.0}};
  KernelFamily family;
  Discretization disc;
  bool grad_operators = true;
  Budgets budgets;
  DecayOptions decay;
  bool export_operators = false;
  std::optional<int> threads;
  std::vector<std::string> audit_waivers;
};

/// Parses and validates; every failure is reported as ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

std::string to_string(Observable observable);

}  // namespace kgap
