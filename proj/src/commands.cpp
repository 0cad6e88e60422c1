#include "kgap/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include "kgap/evolution.hpp"
#include "kgap/spectra.hpp"

namespace kgap {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const Vector& v)
{
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    out.push_back(v(k));
  }
  return out;
}

json to_json(const AuditReport& audit, const std::vector<std::string>& waivers)
{
  json verdicts = json::array();
  for (const auto& v : audit.verdicts) {
    const bool waived = std::find(waivers.begin(), waivers.end(), v.name) != waivers.end();
    verdicts.push_back({{"name", v.name},
                        {"pass", v.pass},
                        {"waived", waived && !v.pass},
                        {"detail", v.detail},
                        {"notes", v.notes}});
  }
  const KernelConstants& c = audit.constants;
  return {{"passed", audit.passed()},
          {"passed_with_waivers", audit.passed_except(waivers)},
          {"waivers", waivers},
          {"samples", audit.samples},
          {"verdicts", verdicts},
          {"kernel_constants",
           {{"ell_b", c.ell_b},
            {"C_b", c.C_b},
            {"beta_eff", c.beta_eff},
            {"C1", c.C1},
            {"C2", c.C2},
            {"delta", c.delta},
            {"C3", c.C3},
            {"C4", c.C4}}}};
}

json discretization_json(const RunConfig& cfg, const OperatorSet* ops)
{
  json d = {{"N", cfg.disc.N},
            {"hermite_q", cfg.disc.hermite_q},
            {"sphere_level", to_string(cfg.disc.sphere_level)},
            {"M_max", cfg.disc.M_max},
            {"species", cfg.mixture.n()},
            {"rho_inf", cfg.mixture.rho_inf()}};
  if (ops != nullptr) {
    d["total_size"] = ops->L.rows();
    d["collision_rule"] = {{"centre_points_per_axis", ops->rule.centre_points},
                           {"radial_points", ops->rule.radial_points},
                           {"sphere_m", ops->rule.sphere_m},
                           {"nodes_per_class", ops->rule.nodes},
                           {"kernel_classes", ops->rule.kernel_classes}};
    d["grad_truncation"] = ops->grad_truncation;
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

void write_json(const fs::path& path, const json& doc)
{
  write_text(path, doc.dump(2) + "\n");
}

fs::path prepare_out(const std::string& out_dir)
{
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  return dir;
}

json header(const std::string& command, const RunConfig& cfg)
{
  return {{"schema_version", schema_version}, {"command", command}, {"seed", cfg.budgets.seed}};
}

/// Runs the audit and records it in `report`; empty when the command must stop.
std::optional<AuditReport> gate_audit(const RunConfig& cfg, json& report, std::ostream& log)
{
  const AuditReport audit = audit_assumptions(cfg.family, cfg.budgets.audit_samples, cfg.budgets.seed);
  report["audit"] = to_json(audit, cfg.audit_waivers);
  if (!audit.passed_except(cfg.audit_waivers)) {
    report["status"] = "audit_failed";
    for (const auto& v : audit.verdicts) {
      if (!v.pass) {
        log << "audit failure " << v.name << ": " << v.detail << "\n";
      }
    }
    return std::nullopt;
  }
  return audit;
}

void export_operators(const OperatorSet& ops, const fs::path& dir)
{
  const fs::path sub = dir / "operators";
  fs::create_directories(sub);
  const std::pair<const char*, const Matrix*> items[] = {
      {"L", &ops.L},           {"Lm", &ops.Lm},     {"Lb", &ops.Lb},       {"Lambda", &ops.Lambda},
      {"K", &ops.K},           {"HGram", &ops.HGram}, {"T1", &ops.transport[0]},
      {"T2", &ops.transport[1]}, {"T3", &ops.transport[2]}, {"GradV1", &ops.grad_v[0]},
      {"GradV2", &ops.grad_v[1]}, {"GradV3", &ops.grad_v[2]}};
  for (const auto& [name, m] : items) {
    write_operator_csv((sub / (std::string(name) + ".csv")).string(), name, *m, ops.meta);
  }
}

json ledger_json(const StepLedger& ledger)
{
  json entries = json::array();
  for (const auto& e : ledger.entries) {
    entries.push_back({{"name", e.name},
                       {"samples", e.samples},
                       {"violations", e.violations},
                       {"worst_margin", e.worst_margin},
                       {"witness", e.witness}});
  }
  return {{"tolerance", ledger.tolerance}, {"passed", ledger.passed()}, {"entries", entries}};
}

json hypotheses_json(const HypothesisReport& h)
{
  json pairs = json::array();
  for (const auto& p : h.h2_pairs) {
    pairs.push_back({{"epsilon", p.epsilon},
                     {"C_certified", p.C_certified},
                     {"C_sample_fit", p.C_sample_fit},
                     {"holdout_margin", p.holdout_margin},
                     {"holdout_violations", p.holdout_violations}});
  }
  return {{"nu_bar_0", h.nu_bar_0},
          {"nu_bar_1", h.nu_bar_1},
          {"nu_bar_2", h.nu_bar_2},
          {"nu_bar_3", h.nu_bar_3},
          {"nu_bar_4", h.nu_bar_4},
          {"C_L", h.C_L},
          {"H1_2", {{"samples", h.h12_samples}, {"violations", h.h12_violations}, {"worst_margin", h.h12_worst_margin}}},
          {"H2", pairs},
          {"H2_monotone", h.h2_monotone},
          {"H3_lambda", h.h3_lambda},
          {"grad_truncation", h.grad_truncation},
          {"passed", h.passed()}};
}

void write_ledger_csv(const fs::path& path, const StepLedger& ledger)
{
  std::ostringstream out;
  out << std::setprecision(17) << "name,samples,violations,worst_margin\n";
  for (const auto& e : ledger.entries) {
    out << e.name << "," << e.samples << "," << e.violations << "," << e.worst_margin << "\n";
  }
  write_text(path, out.str());
}

std::string mode_label(const ModeIndex& m)
{
  return "m_" + std::to_string(m[0]) + "_" + std::to_string(m[1]) + "_" + std::to_string(m[2]);
}

}  // namespace

int resolve_threads(std::optional<int> cli, const char* env, std::optional<int> config)
{
  if (cli) {
    if (*cli < 1) {
      throw ConfigError("--threads must be >= 1");
    }
    return *cli;
  }
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024) {
      throw ConfigError(std::string("KINETIC_GAP_THREADS must be an integer in [1, 1024], got '") + env + "'");
    }
    return static_cast<int>(v);
  }
  if (config) {
    return *config;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_audit(const RunConfig& cfg, const std::string& out_dir, std::ostream& log)
{
  const fs::path dir = prepare_out(out_dir);
  const AuditReport audit = audit_assumptions(cfg.family, cfg.budgets.audit_samples, cfg.budgets.seed);
  json report = header("audit", cfg);
  report["audit"] = to_json(audit, cfg.audit_waivers);
  report["status"] = audit.passed() ? "ok" : "audit_failed";
  write_json(dir / "audit.json", report);
  for (const auto& v : audit.verdicts) {
    log << v.name << " " << (v.pass ? "pass" : "FAIL") << ": " << v.detail << "\n";
  }
  return audit.passed() ? exit_ok : exit_audit;
}

int cmd_constants(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log)
{
  const fs::path dir = prepare_out(out_dir);
  json report = header("constants", cfg);
  const auto gated = gate_audit(cfg, report, log);
  if (!gated) {
    write_json(dir / "constants.json", report);
    return exit_audit;
  }
  const AuditReport& audit = *gated;
  const OperatorSet ops = assemble_operators(cfg.mixture, cfg.family, cfg.disc, threads);
  report["discretization"] = discretization_json(cfg, &ops);
  if (cfg.export_operators) {
    export_operators(ops, dir);
  }
  const KernelBases bases = kernel_bases(cfg.mixture, ops.basis);
  ConstantsReport c;
  try {
    c = compute_constants(ops, cfg.mixture, cfg.family, audit.constants, bases, cfg.budgets.mc_samples,
                          cfg.budgets.seed, threads);
  } catch (const NumericalError& e) {
    report["status"] = "constants_failed";
    report["error"] = e.what();
    write_json(dir / "constants.json", report);
    log << e.what() << "\n";
    return exit_gate;
  }
  json db_pairs = json::array();
  json db_errors = json::array();
  for (std::size_t i = 0; i < c.D_b.pair_values.size(); ++i) {
    db_pairs.push_back(c.D_b.pair_values[i]);
    db_errors.push_back(c.D_b.pair_errors[i]);
  }
  report["constants"] = {{"nu0", c.nu0},
                         {"ell_b", c.ell_b},
                         {"C_b", c.C_b},
                         {"C_m", c.C_m},
                         {"D_b",
                          {{"value", c.D_b.value},
                           {"std_err", c.D_b.std_err},
                           {"samples", c.D_b.samples},
                           {"argmin_pair", {c.D_b.pair_i, c.D_b.pair_j}},
                           {"pairs", db_pairs},
                           {"pair_std_err", db_errors}}},
                         {"C_k", c.C_k},
                         {"eta", c.eta},
                         {"lambda_explicit", c.lambda_explicit},
                         {"lambda_numeric", c.lambda_numeric},
                         {"ratio", c.ratio()}};
  report["provenance"] = c.provenance;

  const StepLedger ledger = verify_step_lemmas(ops, cfg.mixture, bases, c, cfg.budgets.samples,
                                               cfg.budgets.seed + 1);
  report["step_ledger"] = ledger_json(ledger);
  write_ledger_csv(dir / "step_ledger.csv", ledger);
  const HypothesisReport hyp = verify_H1_H3(ops, cfg.mixture, cfg.family, c.lambda_numeric,
                                            cfg.disc.hermite_q, cfg.budgets.samples, cfg.budgets.seed + 2);
  report["hypotheses"] = hypotheses_json(hyp);

  const bool ratio_ok = c.ratio() > 0.0 && c.ratio() <= 1.05;
  report["gates"] = {{"ratio_in_(0,1.05]", ratio_ok},
                     {"step_ledger", ledger.passed()},
                     {"hypotheses", hyp.passed()}};
  const bool ok = ratio_ok && ledger.passed() && hyp.passed();
  report["status"] = ok ? "ok" : "gate_failed";
  write_json(dir / "constants.json", report);
  log << std::setprecision(6) << "lambda_explicit=" << c.lambda_explicit
      << " lambda_numeric=" << c.lambda_numeric << " ratio=" << c.ratio() << "\n";
  return ok ? exit_ok : exit_gate;
}

int cmd_spectrum(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log)
{
  const fs::path dir = prepare_out(out_dir);
  json report = header("spectrum", cfg);
  const auto gated = gate_audit(cfg, report, log);
  if (!gated) {
    write_json(dir / "spectrum.json", report);
    return exit_audit;
  }
  const AuditReport& audit = *gated;
  const OperatorSet ops = assemble_operators(cfg.mixture, cfg.family, cfg.disc, threads);
  report["discretization"] = discretization_json(cfg, &ops);
  if (cfg.export_operators) {
    export_operators(ops, dir);
  }
  const KernelBases bases = kernel_bases(cfg.mixture, ops.basis);
  const double nu0 = nu0_bound(cfg.mixture, cfg.family, audit.constants.ell_b, audit.constants.C1);
  const SpectralReport s = spectral_report(ops, cfg.mixture, cfg.family, bases.ker_L, nu0, cfg.disc.hermite_q);

  const bool kernel_ok = s.kernel_dim == s.expected_kernel_dim;
  const bool isolation_ok = s.isolation_ratio >= 0.9;
  const double lambda_min = s.Lambda_eigenvalues(0);
  const bool lambda_ok = lambda_min >= nu0 - 1e-6;
  const bool nodes_ok = s.nu_min_nodes >= nu0 - 1e-6;
  const double L_max = s.L_eigenvalues(s.L_eigenvalues.size() - 1);
  const bool semidefinite = L_max <= 1e-8 * s.L_norm;
  const double sym = symmetry_defect(ops.L);
  const bool symmetric = sym <= 1e-10;
  report["spectrum"] = {{"kernel_dim", s.kernel_dim},
                        {"expected_kernel_dim", s.expected_kernel_dim},
                        {"threshold", s.threshold},
                        {"gap_numeric", s.gap_numeric},
                        {"isolation_ratio", s.isolation_ratio},
                        {"nu0", nu0},
                        {"essential_onset", s.essential_onset},
                        {"nu_min_nodes", s.nu_min_nodes},
                        {"nu_max_nodes", s.nu_max_nodes},
                        {"Lambda_min", lambda_min},
                        {"L_max", L_max},
                        {"L_norm", s.L_norm},
                        {"L_symmetry_defect", sym},
                        {"eigenvalues", to_json(s.eigenvalues)}};
  report["gates"] = {{"kernel_dim", kernel_ok},
                     {"isolation", isolation_ok},
                     {"Lambda_above_nu0", lambda_ok},
                     {"nu_above_nu0_at_nodes", nodes_ok},
                     {"L_negative_semidefinite", semidefinite},
                     {"L_symmetric", symmetric}};
  const bool ok = kernel_ok && isolation_ok && lambda_ok && nodes_ok && semidefinite && symmetric;
  report["status"] = ok ? "ok" : "gate_failed";
  write_json(dir / "spectrum.json", report);

  std::ostringstream csv;
  csv << std::setprecision(17) << "index,generalized,L,Lambda\n";
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    csv << k << "," << s.eigenvalues(k) << "," << s.L_eigenvalues(k) << "," << s.Lambda_eigenvalues(k) << "\n";
  }
  write_text(dir / "eigenvalues.csv", csv.str());
  log << "kernel_dim=" << s.kernel_dim << " (expected " << s.expected_kernel_dim
      << ") gap=" << s.gap_numeric << "\n";
  return ok ? exit_ok : exit_gate;
}

int cmd_decay(const RunConfig& cfg, const std::string& out_dir, int threads, std::ostream& log)
{
  if (!cfg.grad_operators) {
    throw ConfigError("decay: the H1 and G observables need the grad_v operators "
                      "(discretization.grad_operators is false)");
  }
  const fs::path dir = prepare_out(out_dir);
  json report = header("decay", cfg);
  if (!gate_audit(cfg, report, log)) {
    write_json(dir / "decay.json", report);
    return exit_audit;
  }
  const OperatorSet ops = assemble_operators(cfg.mixture, cfg.family, cfg.disc, threads);
  report["discretization"] = discretization_json(cfg, &ops);
  if (cfg.export_operators) {
    export_operators(ops, dir);
  }
  const KernelBases bases = kernel_bases(cfg.mixture, ops.basis);
  const double lambda_numeric = generalized_gap(ops.L, ops.HGram, bases.ker_L);

  const CoefficientSearch search =
      search_coefficients(ops, bases.ker_L, cfg.disc.M_max, cfg.budgets.samples, cfg.budgets.seed + 3);
  json margins = json::array();
  for (const auto& [m, v] : search.mode_margins) {
    margins.push_back({{"m", m}, {"margin", v}});
  }
  report["coefficients"] = {{"c1", search.coeffs.c1},
                            {"c2", search.coeffs.c2},
                            {"c3", search.coeffs.c3},
                            {"c4", search.coeffs.c4},
                            {"kappa", search.kappa},
                            {"kappa1", search.equivalence.kappa1},
                            {"kappa2", search.equivalence.kappa2},
                            {"rate", search.rate},
                            {"ceiling", search.ceiling},
                            {"candidates", search.candidates},
                            {"samples", search.samples},
                            {"violations", search.violations},
                            {"worst_sample_margin", search.worst_sample_margin},
                            {"c4_zero_margin", search.c4_zero_margin},
                            {"orbit_margins", margins},
                            {"success", search.success}};

  const TorusState initial = initial_state(ops, bases, cfg.disc.M_max, cfg.decay.initial,
                                           cfg.decay.amplitude, cfg.budgets.seed + 4);
  const Vector f_inf = equilibrium(initial, bases.ker_L);
  EvolveOptions opts;
  opts.dt = cfg.decay.dt;
  opts.t_end = cfg.decay.t_end;
  opts.scheme = cfg.decay.scheme;
  opts.allow_stiff = cfg.decay.allow_stiff;
  opts.record_every = cfg.decay.record_every;
  opts.threads = threads;
  const Trajectory traj = evolve(ops.L, ops.transport, initial, opts);

  const std::size_t records = traj.times.size();
  const std::size_t centre = initial.modes.size() / 2;
  std::vector<double> dist(records);
  std::vector<double> gval(records);
  std::vector<std::vector<double>> mode_norms(records);
  double drift = 0.0;
  const Vector p0 = project(bases.ker_L, initial.modes[centre].coeffs.head(ops.L.rows()));
  for (std::size_t r = 0; r < records; ++r) {
    const TorusState g = subtract_equilibrium(traj.states[r], f_inf);
    dist[r] = std::sqrt(h1_norm(g, ops));
    gval[r] = hypo_functional(g, search.coeffs, ops);
    for (const auto& mode : g.modes) {
      mode_norms[r].push_back(mode.coeffs.norm());
    }
    if (traj.times[r] > 0.0) {
      const Vector p = project(bases.ker_L, traj.states[r].modes[centre].coeffs.head(ops.L.rows()));
      drift = std::max(drift, (p - p0).norm() / traj.times[r]);
    }
  }
  bool g_monotone = true;
  for (std::size_t r = 1; r < records; ++r) {
    if (gval[r] > gval[r - 1] * (1.0 + 1e-10) + 1e-15) {
      g_monotone = false;
    }
  }

  std::ostringstream csv;
  csv << std::setprecision(17) << "t";
  for (const auto& mode : initial.modes) {
    csv << "," << mode_label(mode.m);
  }
  csv << ",h1_distance,G\n";
  for (std::size_t r = 0; r < records; ++r) {
    csv << traj.times[r];
    for (double v : mode_norms[r]) {
      csv << "," << v;
    }
    csv << "," << dist[r] << "," << gval[r] << "\n";
  }
  write_text(dir / "trajectory.csv", csv.str());

  report["equilibrium_norm"] = f_inf.norm();
  report["initial_h1_distance"] = dist.front();
  report["conservation_drift_per_unit_time"] = drift;
  report["G_monotone"] = g_monotone;
  report["tau_reference"] = 0.5 * search.ceiling;
  report["lambda_numeric"] = lambda_numeric;
  report["evolution"] = {{"scheme", to_string(cfg.decay.scheme)},
                         {"dt", cfg.decay.dt},
                         {"t_end", traj.times.back()},
                         {"records", records},
                         {"modes", initial.modes.size()},
                         {"observable", to_string(cfg.decay.observable)}};

  const bool trivial = dist.front() <= 1e-13 * std::max(1.0, f_inf.norm());
  report["trivial_decay"] = trivial;
  const bool conserved = drift < 1e-9;
  if (trivial) {
    report["gates"] = {{"conservation", conserved}};
    report["status"] = conserved ? "ok" : "gate_failed";
    write_json(dir / "decay.json", report);
    log << "initial data is the equilibrium; trivial decay\n";
    return conserved ? exit_ok : exit_gate;
  }

  const std::vector<double>& series = cfg.decay.observable == Observable::G ? gval : dist;
  DecayFit fit;
  try {
    fit = fit_decay(traj.times, series, cfg.decay.transient);
  } catch (const NumericalError& e) {
    report["status"] = "fit_failed";
    report["error"] = e.what();
    write_json(dir / "decay.json", report);
    log << e.what() << "\n";
    return exit_gate;
  }
  double envelope_all = 0.0;
  for (std::size_t r = 0; r < records; ++r) {
    envelope_all = std::max(envelope_all, series[r] / (fit.C * std::exp(-fit.tau * traj.times[r])));
  }
  report["fit"] = {{"tau_fit", fit.tau},
                   {"C", fit.C},
                   {"r_squared", fit.r_squared},
                   {"window", {fit.t_start, fit.t_stop}},
                   {"samples", fit.samples},
                   {"envelope_ratio", fit.envelope_ratio},
                   {"envelope_ratio_all_samples", envelope_all},
                   {"floor_limited", fit.floor_limited}};
  const bool ok_tau = fit.tau > 0.0;
  const bool ok_r2 = fit.r_squared >= 0.99;
  const bool ok_env = fit.envelope_ratio <= 1.05;
  report["gates"] = {{"tau_positive", ok_tau},
                     {"r_squared", ok_r2},
                     {"envelope", ok_env},
                     {"G_monotone", g_monotone},
                     {"conservation", conserved},
                     {"coefficient_search", search.success}};
  const bool ok = ok_tau && ok_r2 && ok_env && g_monotone && conserved && search.success;
  report["status"] = ok ? "ok" : "gate_failed";
  write_json(dir / "decay.json", report);
  log << std::setprecision(6) << "tau_fit=" << fit.tau << " r2=" << fit.r_squared
      << " envelope=" << fit.envelope_ratio << " kappa=" << search.kappa << "\n";
  return ok ? exit_ok : exit_gate;
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log,
                std::ostream& err)
{
  try {
    if (command != "audit" && command != "constants" && command != "spectrum" && command != "decay") {
      throw ConfigError("unknown command '" + command + "'");
    }
    RunConfig cfg = load_config(options.config_path);
    if (options.seed) {
      cfg.budgets.seed = *options.seed;
    }
    const int threads = resolve_threads(options.threads, std::getenv("KINETIC_GAP_THREADS"), cfg.threads);
    if (command == "audit") {
      return cmd_audit(cfg, options.out_dir, log);
    }
    if (command == "constants") {
      return cmd_constants(cfg, options.out_dir, threads, log);
    }
    if (command == "spectrum") {
      return cmd_spectrum(cfg, options.out_dir, threads, log);
    }
    return cmd_decay(cfg, options.out_dir, threads, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_gate;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
}

}  // namespace kgap
