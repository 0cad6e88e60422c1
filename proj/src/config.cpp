#include "kgap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kgap {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

double number(const json& obj, const std::string& key, const std::string& where)
{
  if (!obj.contains(key)) {
    throw ConfigError(where + ": missing '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError(where + "." + key + ": expected a number");
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    throw ConfigError(where + "." + key + ": not finite");
  }
  return x;
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where)
{
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& where)
{
  if (!obj.contains(key)) {
    return std::nullopt;
  }
  return number(obj, key, where);
}

long long integer_or(const json& obj, const std::string& key, long long fallback, const std::string& where)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(where + "." + key + ": expected an integer");
  }
  return v.get<long long>();
}

std::size_t count_or(const json& obj, const std::string& key, std::size_t fallback, const std::string& where)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json& v = obj.at(key);
  if (v.is_number_unsigned()) {
    return v.get<std::size_t>();
  }
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x >= 0.0 && x == std::floor(x) && x < 1e15) {
      return static_cast<std::size_t>(x);
    }
  }
  throw ConfigError(where + "." + key + ": expected a non-negative integer");
}

bool flag_or(const json& obj, const std::string& key, bool fallback, const std::string& where)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  if (!obj.at(key).is_boolean()) {
    throw ConfigError(where + "." + key + ": expected true or false");
  }
  return obj.at(key).get<bool>();
}

std::string text_or(const json& obj, const std::string& key, const std::string& fallback,
                    const std::string& where)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  if (!obj.at(key).is_string()) {
    throw ConfigError(where + "." + key + ": expected a string");
  }
  return obj.at(key).get<std::string>();
}

PowerLaw parse_phi(const json& obj, const std::string& where)
{
  check_keys(obj, where, {"type", "C", "gamma"});
  const std::string type = text_or(obj, "type", "power", where);
  if (type != "power") {
    throw ConfigError(where + ".type: only 'power' is supported");
  }
  return {number(obj, "C", where), number(obj, "gamma", where)};
}

AngularPolynomial parse_b(const json& obj, const std::string& where)
{
  check_keys(obj, where, {"type", "coeffs"});
  const std::string type = text_or(obj, "type", "poly", where);
  if (type != "poly") {
    throw ConfigError(where + ".type: only 'poly' is supported");
  }
  if (!obj.contains("coeffs") || !obj.at("coeffs").is_array() || obj.at("coeffs").empty()) {
    throw ConfigError(where + ".coeffs: expected a non-empty array");
  }
  AngularPolynomial b;
  b.coeffs.clear();
  for (const auto& c : obj.at("coeffs")) {
    if (!c.is_number() || !std::isfinite(c.get<double>())) {
      throw ConfigError(where + ".coeffs: expected finite numbers");
    }
    b.coeffs.push_back(c.get<double>());
  }
  return b;
}

/// A single descriptor applies to every pair; otherwise an n x n array.
template <typename T, typename Parse>
std::vector<T> pair_table(const json& node, int n, const std::string& where, Parse parse)
{
  std::vector<T> out;
  if (node.is_object()) {
    out.assign(static_cast<std::size_t>(n * n), parse(node, where));
    return out;
  }
  if (!node.is_array() || node.size() != static_cast<std::size_t>(n)) {
    throw ConfigError(where + ": expected one descriptor or an n x n array");
  }
  for (int i = 0; i < n; ++i) {
    const json& row = node.at(static_cast<std::size_t>(i));
    if (!row.is_array() || row.size() != static_cast<std::size_t>(n)) {
      throw ConfigError(where + ": row " + std::to_string(i) + " must have n entries");
    }
    for (int j = 0; j < n; ++j) {
      std::ostringstream w;
      w << where << "[" << i << "][" << j << "]";
      out.push_back(parse(row.at(static_cast<std::size_t>(j)), w.str()));
    }
  }
  return out;
}

}  // namespace

std::string to_string(Observable observable)
{
  return observable == Observable::G ? "G" : "h1_distance_to_equilibrium";
}

RunConfig parse_config(const json& doc)
{
  check_keys(doc, "config",
             {"schema_version", "mixture", "kernel", "discretization", "budgets", "decay",
              "export_operators", "threads", "audit_waivers", "description"});
  RunConfig cfg;
  if (integer_or(doc, "schema_version", schema_version, "config") != schema_version) {
    throw ConfigError("config.schema_version: unsupported version");
  }

  // mixture
  if (!doc.contains("mixture")) {
    throw ConfigError("config: missing 'mixture'");
  }
  const json& mix = doc.at("mixture");
  check_keys(mix, "mixture", {"species"});
  if (!mix.contains("species") || !mix.at("species").is_array() || mix.at("species").empty()) {
    throw ConfigError("mixture.species: expected a non-empty array");
  }
  std::vector<double> rho;
  for (std::size_t i = 0; i < mix.at("species").size(); ++i) {
    const json& s = mix.at("species").at(i);
    const std::string where = "mixture.species[" + std::to_string(i) + "]";
    check_keys(s, where, {"rho_inf", "name"});
    rho.push_back(number(s, "rho_inf", where));
  }
  try {
    cfg.mixture = Mixture(rho);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
  const int n = cfg.mixture.n();

  // kernel
  if (!doc.contains("kernel")) {
    throw ConfigError("config: missing 'kernel'");
  }
  const json& ker = doc.at("kernel");
  check_keys(ker, "kernel", {"phi", "b", "C1", "C2", "delta", "C3", "C4", "beta"});
  if (!ker.contains("phi") || !ker.contains("b")) {
    throw ConfigError("kernel: 'phi' and 'b' are required");
  }
  cfg.family.n = n;
  cfg.family.phi = pair_table<PowerLaw>(ker.at("phi"), n, "kernel.phi", parse_phi);
  cfg.family.b = pair_table<AngularPolynomial>(ker.at("b"), n, "kernel.b", parse_b);
  cfg.family.C1 = optional_number(ker, "C1", "kernel");
  cfg.family.C2 = optional_number(ker, "C2", "kernel");
  cfg.family.delta = optional_number(ker, "delta", "kernel");
  cfg.family.C3 = optional_number(ker, "C3", "kernel");
  cfg.family.C4 = optional_number(ker, "C4", "kernel");
  cfg.family.beta = optional_number(ker, "beta", "kernel");
  try {
    cfg.family.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  // discretization
  if (doc.contains("discretization")) {
    const json& d = doc.at("discretization");
    check_keys(d, "discretization",
               {"N", "hermite_q", "sphere_level", "M_max", "max_collision_nodes", "grad_operators"});
    cfg.disc.N = static_cast<int>(integer_or(d, "N", cfg.disc.N, "discretization"));
    cfg.disc.hermite_q = static_cast<int>(integer_or(d, "hermite_q", cfg.disc.hermite_q, "discretization"));
    cfg.disc.M_max = static_cast<int>(integer_or(d, "M_max", cfg.disc.M_max, "discretization"));
    cfg.disc.max_collision_nodes =
        count_or(d, "max_collision_nodes", cfg.disc.max_collision_nodes, "discretization");
    cfg.grad_operators = flag_or(d, "grad_operators", true, "discretization");
    try {
      cfg.disc.sphere_level = parse_sphere_level(text_or(d, "sphere_level", "coarse", "discretization"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("discretization.sphere_level: ") + e.what());
    }
  }
  if (cfg.disc.N < 2 || cfg.disc.N > 11) {
    throw ConfigError("discretization.N: must lie in [2, 11]");
  }
  if (cfg.disc.hermite_q < cfg.disc.N + 1 || cfg.disc.hermite_q > 64) {
    throw ConfigError("discretization.hermite_q: must lie in [N + 1, 64]");
  }
  if (cfg.disc.M_max < 0 || cfg.disc.M_max > 8) {
    throw ConfigError("discretization.M_max: must lie in [0, 8]");
  }

  // budgets
  if (doc.contains("budgets")) {
    const json& b = doc.at("budgets");
    check_keys(b, "budgets", {"mc_samples", "samples", "audit_samples", "seed"});
    cfg.budgets.mc_samples = count_or(b, "mc_samples", cfg.budgets.mc_samples, "budgets");
    cfg.budgets.samples = count_or(b, "samples", cfg.budgets.samples, "budgets");
    cfg.budgets.audit_samples = count_or(b, "audit_samples", cfg.budgets.audit_samples, "budgets");
    cfg.budgets.seed = count_or(b, "seed", cfg.budgets.seed, "budgets");
  }
  if (cfg.budgets.mc_samples < 100000) {
    throw ConfigError("budgets.mc_samples: must be >= 100000");
  }
  if (cfg.budgets.samples < 1 || cfg.budgets.audit_samples < 1000) {
    throw ConfigError("budgets: samples must be >= 1 and audit_samples >= 1000");
  }

  // decay
  if (doc.contains("decay")) {
    const json& d = doc.at("decay");
    check_keys(d, "decay",
               {"t_end", "dt", "scheme", "allow_stiff", "record_every", "transient", "observable",
                "initial"});
    DecayOptions& o = cfg.decay;
    o.t_end = number_or(d, "t_end", o.t_end, "decay");
    o.dt = number_or(d, "dt", o.dt, "decay");
    o.allow_stiff = flag_or(d, "allow_stiff", o.allow_stiff, "decay");
    o.record_every = static_cast<int>(integer_or(d, "record_every", o.record_every, "decay"));
    o.transient = number_or(d, "transient", o.transient, "decay");
    try {
      o.scheme = parse_scheme(text_or(d, "scheme", "expm", "decay"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("decay.scheme: ") + e.what());
    }
    const std::string obs = text_or(d, "observable", "h1_distance_to_equilibrium", "decay");
    if (obs == "h1_distance_to_equilibrium") {
      o.observable = Observable::h1_distance;
    } else if (obs == "G") {
      o.observable = Observable::G;
    } else {
      throw ConfigError("decay.observable: expected h1_distance_to_equilibrium or G");
    }
    if (d.contains("initial")) {
      const json& init = d.at("initial");
      check_keys(init, "decay.initial", {"kind", "amplitude"});
      try {
        o.initial = parse_initial_kind(text_or(init, "kind", "random_perturbation", "decay.initial"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("decay.initial.kind: ") + e.what());
      }
      o.amplitude = number_or(init, "amplitude", o.amplitude, "decay.initial");
    }
    if (!(o.dt > 0.0) || !(o.t_end > o.dt) || o.record_every < 1 || !(o.transient >= 0.0 && o.transient < 1.0) ||
        !(o.amplitude > 0.0)) {
      throw ConfigError("decay: need dt > 0, t_end > dt, record_every >= 1, transient in [0, 1), amplitude > 0");
    }
  }

  cfg.export_operators = flag_or(doc, "export_operators", false, "config");
  if (doc.contains("threads")) {
    const long long t = integer_or(doc, "threads", 1, "config");
    if (t < 1 || t > 1024) {
      throw ConfigError("config.threads: must lie in [1, 1024]");
    }
    cfg.threads = static_cast<int>(t);
  }
  if (doc.contains("audit_waivers")) {
    const json& w = doc.at("audit_waivers");
    if (!w.is_array()) {
      throw ConfigError("config.audit_waivers: expected an array of assumption names");
    }
    for (const auto& x : w) {
      const std::string name = x.is_string() ? x.get<std::string>() : "";
      if (name.size() != 2 || name[0] != 'A' || name[1] < '1' || name[1] > '6') {
        throw ConfigError("config.audit_waivers: entries must be A1 ... A6");
      }
      cfg.audit_waivers.push_back(name);
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace kgap
