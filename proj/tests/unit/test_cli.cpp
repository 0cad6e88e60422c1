#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kgap/commands.hpp"
#include "kgap/config.hpp"

using namespace kgap;
namespace fs = std::filesystem;

namespace {

std::string config(const std::string& name)
{
  return std::string(KGAP_CONFIG_DIR) + "/" + name + ".json";
}

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("kgap_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args)
{
  const std::string cmd = std::string(KGAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json base_config()
{
  std::ifstream in(config("maxwellian_n1"));
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("config parsing and validation")
{
  const RunConfig cfg = parse_config(base_config());
  CHECK(cfg.mixture.n() == 1);
  CHECK(cfg.disc.N == 4);
  CHECK(cfg.budgets.seed == 20240601);

  auto broken = [](auto edit) {
    nlohmann::json j = base_config();
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["schema_version"] = 2; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["surprise"] = 1; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["discretization"]["N"] = 1; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["discretization"]["hermite_q"] = 4; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["budgets"]["mc_samples"] = 1000; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["kernel"]["phi"]["gamma"] = 1.5; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["mixture"]["species"][0]["rho_inf"] = -1.0; })), ConfigError);
  CHECK_THROWS_AS(parse_config(broken([](auto& j) { j["audit_waivers"] = {"A9"}; })), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

  // Per-pair descriptors.
  const RunConfig mixed = load_config(config("mixed_gamma_n2"));
  CHECK(mixed.family.kinetic(0, 0).gamma != mixed.family.kinetic(1, 1).gamma);
  CHECK(mixed.family.kinetic(0, 1).gamma == mixed.family.kinetic(1, 0).gamma);
}

TEST_CASE("thread resolution order")
{
  CHECK(resolve_threads(2, "5", 7) == 2);
  CHECK(resolve_threads(std::nullopt, "5", 7) == 5);
  CHECK(resolve_threads(std::nullopt, nullptr, 7) == 7);
  CHECK(resolve_threads(std::nullopt, nullptr, std::nullopt) >= 1);
  CHECK_THROWS_AS(resolve_threads(std::nullopt, "many", std::nullopt), ConfigError);
  CHECK_THROWS_AS(resolve_threads(std::nullopt, "0", std::nullopt), ConfigError);
}

TEST_CASE("in-process dispatch maps errors to exit codes")
{
  std::ostringstream log;
  std::ostringstream err;
  const fs::path out = scratch("dispatch");
  CHECK(run_command("audit", {config("bad_gamma"), out.string(), {}, {}}, log, err) == exit_config);
  CHECK(run_command("audit", {config("odd_b"), out.string(), {}, {}}, log, err) == exit_audit);
  CHECK(run_command("frobnicate", {config("maxwellian_n1"), out.string(), {}, {}}, log, err) == exit_config);
  CHECK(run_command("decay", {config("decay_no_grad"), out.string(), {}, {}}, log, err) == exit_config);
  CHECK_FALSE(err.str().empty());
  fs::remove_all(out);
}

TEST_CASE("CLI: audit output and exit codes")
{
  const fs::path out = scratch("audit");
  CHECK(run_cli("audit --config " + config("hard_spheres_n2") + " --out " + out.string()) == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "audit.json"));
  CHECK(j.at("schema_version") == 1);
  CHECK(run_cli("audit --config " + config("odd_b") + " --out " + out.string()) == 2);
  CHECK(run_cli("audit --config " + config("bad_gamma") + " --out " + out.string()) == 1);
  CHECK(run_cli("audit --config " + config("mixed_gamma_n2") + " --out " + out.string()) == 2);
  CHECK(run_cli("audit --out " + out.string()) == 1);
  CHECK(run_cli("audit --config " + config("hard_spheres_n2") + " --out " + out.string() + " --threads x") == 1);
  CHECK(run_cli("") == 1);
  fs::remove_all(out);
}

TEST_CASE("CLI: constants are reproducible across runs and thread counts")
{
  const fs::path a = scratch("constants_a");
  const fs::path b = scratch("constants_b");
  CHECK(run_cli("constants --config " + config("maxwellian_n1") + " --out " + a.string() + " --threads 1") == 0);
  CHECK(run_cli("constants --config " + config("maxwellian_n1") + " --out " + b.string() + " --threads 2") == 0);
  const std::string ja = slurp(a / "constants.json");
  CHECK_FALSE(ja.empty());
  CHECK(ja == slurp(b / "constants.json"));
  CHECK(slurp(a / "step_ledger.csv") == slurp(b / "step_ledger.csv"));
  const nlohmann::json j = nlohmann::json::parse(ja);
  CHECK(j.at("schema_version") == 1);
  const double ratio = j.at("constants").at("lambda_explicit").get<double>() /
                       j.at("constants").at("lambda_numeric").get<double>();
  CHECK(ratio > 0.0);
  CHECK(ratio <= 1.05);

  // A different seed changes the Monte-Carlo part only.
  const fs::path c = scratch("constants_c");
  CHECK(run_cli("constants --config " + config("maxwellian_n1") + " --out " + c.string() + " --seed 7") == 0);
  const nlohmann::json jc = nlohmann::json::parse(slurp(c / "constants.json"));
  CHECK(jc.at("constants").at("lambda_numeric") == j.at("constants").at("lambda_numeric"));
  for (const auto& p : {a, b, c}) {
    fs::remove_all(p);
  }
}

TEST_CASE("CLI: environment thread fallback")
{
  const fs::path out = scratch("env");
  const std::string cmd = "KINETIC_GAP_THREADS=bogus " + std::string(KGAP_CLI_PATH) + " audit --config " +
                          config("maxwellian_n1") + " --out " + out.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  const std::string ok = "KINETIC_GAP_THREADS=2 " + std::string(KGAP_CLI_PATH) + " audit --config " +
                         config("maxwellian_n1") + " --out " + out.string() + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(ok.c_str())) == 0);
  fs::remove_all(out);
}

TEST_CASE("CLI: spectrum and decay outputs")
{
  const fs::path out = scratch("spectrum");
  CHECK(run_cli("spectrum --config " + config("maxwellian_n1") + " --out " + out.string()) == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "spectrum.json"));
  CHECK(j.at("schema_version") == 1);
  CHECK(fs::exists(out / "eigenvalues.csv"));

  const fs::path dec = scratch("decay");
  CHECK(run_cli("decay --config " + config("decay_equilibrium") + " --out " + dec.string()) == 0);
  const nlohmann::json d = nlohmann::json::parse(slurp(dec / "decay.json"));
  CHECK(d.at("schema_version") == 1);
  CHECK(fs::exists(dec / "trajectory.csv"));
  CHECK(run_cli("decay --config " + config("decay_no_grad") + " --out " + dec.string()) == 1);
  fs::remove_all(out);
  fs::remove_all(dec);
}
