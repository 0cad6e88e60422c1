// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgap/commands.hpp"
#include "kgap/config.hpp"
#include "kgap/evolution.hpp"
#include "kgap/galerkin.hpp"
#include "kgap/quadrature.hpp"
#include "kgap/spectra.hpp"
#include "oracles.hpp"

using namespace kgap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
  bool pass = false;
  std::string detail;
};

/// Assembled problem for one configuration file, built on first use.
struct Problem
{
  RunConfig cfg;
  OperatorSet ops;
  KernelBases bases;
  AuditReport audit;
  double assembly_seconds = 0.0;
  std::unique_ptr<ConstantsReport> constants;
};

std::map<std::string, std::unique_ptr<Problem>> cache;

std::string config_path(const std::string& name)
{
  return std::string(KGAP_CONFIG_DIR) + "/" + name + ".json";
}

Problem& problem(const std::string& name)
{
  auto& slot = cache[name];
  if (!slot) {
    slot = std::make_unique<Problem>();
    slot->cfg = load_config(config_path(name));
    const auto t0 = Clock::now();
    slot->ops = assemble_operators(slot->cfg.mixture, slot->cfg.family, slot->cfg.disc, 1);
    slot->assembly_seconds = seconds_since(t0);
    slot->bases = kernel_bases(slot->cfg.mixture, slot->ops.basis);
    slot->audit = audit_assumptions(slot->cfg.family, slot->cfg.budgets.audit_samples, slot->cfg.budgets.seed);
  }
  return *slot;
}

const ConstantsReport& constants_of(Problem& p)
{
  if (!p.constants) {
    p.constants = std::make_unique<ConstantsReport>(
        compute_constants(p.ops, p.cfg.mixture, p.cfg.family, p.audit.constants, p.bases,
                          p.cfg.budgets.mc_samples, p.cfg.budgets.seed, 1));
  }
  return *p.constants;
}

std::string fmt(double x)
{
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome criterion_1()
{
  const auto t0 = Clock::now();
  CollisionSampler sampler(20240601);
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const CollisionSample s = sampler.next();
    const CollisionPair c = post_collision(s.v, s.v_star, s.sigma);
    const double e0 = dot(s.v, s.v) + dot(s.v_star, s.v_star);
    const double e1 = dot(c.v_prime, c.v_prime) + dot(c.v_prime_star, c.v_prime_star);
    worst = std::max(worst, std::abs(e1 - e0) / e0);
    for (std::size_t a = 0; a < 3; ++a) {
      const double p0 = s.v[a] + s.v_star[a];
      const double p1 = c.v_prime[a] + c.v_prime_star[a];
      worst = std::max(worst, std::abs(p1 - p0) / std::sqrt(e0));
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-12 && elapsed < 1.0,
          "1e5 collisions, worst relative defect " + fmt(worst) + ", " + fmt(elapsed) + " s"};
}

Outcome criterion_2()
{
  Problem& p = problem("hard_spheres_n2");
  const auto t0 = Clock::now();
  const EigenSystem e = symmetric_eigen(p.ops.L);
  const double total = p.assembly_seconds + seconds_since(t0);
  const double norm = max_abs(p.ops.L);
  const double sym = symmetry_defect(p.ops.L) / norm;
  const double top = e.values.maxCoeff();
  const bool ok = sym <= 1e-10 && top <= 1e-8 * norm && total <= 600.0;
  return {ok, "n=2 hard spheres N=4: symmetry " + fmt(sym) + " (relative), max eigenvalue " + fmt(top) +
                  ", assembly+eigen " + fmt(total) + " s"};
}

Outcome criterion_3()
{
  bool ok = true;
  std::string detail;
  for (const char* name : {"maxwellian_n1", "hard_spheres_n2", "hard_spheres_n3"}) {
    Problem& p = problem(name);
    const double nu0 = nu0_bound(p.cfg.mixture, p.cfg.family, p.audit.constants.ell_b, p.audit.constants.C1);
    const SpectralReport r =
        spectral_report(p.ops, p.cfg.mixture, p.cfg.family, p.bases.ker_L, nu0, p.cfg.disc.hermite_q);
    const int n = p.cfg.mixture.n();
    ok = ok && p.cfg.disc.N == 4 && r.kernel_dim == n + 4 && r.isolation_ratio >= 0.9;
    detail += "n=" + std::to_string(n) + " kernel " + std::to_string(r.kernel_dim) + " isolation " +
              fmt(r.isolation_ratio) + "; ";
  }
  return {ok, detail};
}

Outcome criterion_4()
{
  const Mixture mixture({1.0, 0.5});
  const AngularPolynomial b{{1.0 / (4.0 * std::numbers::pi)}};
  const QuadratureRule nodes = hermite_rule_3d(10);
  bool ok = true;
  std::string detail;
  for (double gamma : {0.0, 0.5, 1.0}) {
    const KernelFamily f = uniform_family(2, PowerLaw{1.0, gamma}, b);
    const AuditReport audit = audit_assumptions(f, 1000, 1);
    const double nu0 = nu0_bound(mixture, f, audit.constants.ell_b, audit.constants.C1);
    double worst = 1e300;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      for (int i = 0; i < 2; ++i) {
        worst = std::min(worst, collision_frequency(mixture, f, i, nodes.point(k)) - nu0);
      }
    }
    ok = ok && worst >= -1e-6;
    if (gamma == 0.0) {
      const double closed = audit.constants.C1 * audit.constants.ell_b * mixture.rho_total() / 2.0;
      ok = ok && std::abs(nu0 - closed) <= 1e-6;
      detail += "gamma=0 nu0 " + fmt(nu0) + " vs closed form " + fmt(closed) + "; ";
    }
    detail += "gamma=" + fmt(gamma) + " min(nu - nu0) " + fmt(worst) + "; ";
  }
  return {ok, detail};
}

Outcome criterion_5()
{
  bool ok = true;
  std::string detail;
  for (const char* name : {"maxwellian_n1", "hard_spheres_n2", "mixed_gamma_n2"}) {
    Problem& p = problem(name);
    const ConstantsReport& c = constants_of(p);
    const bool db_ok = c.D_b.value > 3.0 * c.D_b.std_err;
    const double ratio = c.ratio();
    const bool ratio_ok = ratio > 0.0 && ratio <= 1.05;
    // -(f, L f) >= lambda_explicit ||f - Pi f||_H^2 - 1e-8 on 1e3 random f.
    const Matrix F = random_unit_columns(p.ops.L.rows(), 1000, p.cfg.budgets.seed + 101);
    std::size_t violations = 0;
    double worst = 1e300;
    for (Eigen::Index k = 0; k < F.cols(); ++k) {
      const Vector f = F.col(k);
      const Vector g = f - project(p.bases.ker_L, f);
      const double lhs = -f.dot(p.ops.L * f);
      const double rhs = c.lambda_explicit * g.dot(p.ops.HGram * g);
      worst = std::min(worst, lhs - rhs);
      violations += lhs < rhs - 1e-8 ? 1 : 0;
    }
    ok = ok && db_ok && ratio_ok && violations == 0;
    detail += std::string(name) + " ratio " + fmt(ratio) + " D_b/se " + fmt(c.D_b.value / c.D_b.std_err) +
              " violations " + std::to_string(violations) + "; ";
  }
  return {ok, detail};
}

Outcome criterion_6()
{
  bool ok = true;
  std::string detail;
  for (const char* name : {"maxwellian_n1", "hard_spheres_n2", "mixed_gamma_n2"}) {
    Problem& p = problem(name);
    const StepLedger ledger =
        verify_step_lemmas(p.ops, p.cfg.mixture, p.bases, constants_of(p), 1000, p.cfg.budgets.seed + 1);
    std::size_t violations = 0;
    std::size_t fewest = 1u << 30;
    for (const auto& e : ledger.entries) {
      violations += e.violations;
      fewest = std::min(fewest, e.samples);
    }
    ok = ok && ledger.passed() && violations == 0 && fewest >= 1000 && ledger.tolerance <= 1e-8;
    detail += std::string(name) + " entries " + std::to_string(ledger.entries.size()) + " violations " +
              std::to_string(violations) + "; ";
  }
  return {ok, detail};
}

Outcome criterion_7()
{
  bool ok = true;
  std::string detail;
  for (const char* name : {"maxwellian_n1", "hard_spheres_n2", "mixed_gamma_n2"}) {
    Problem& p = problem(name);
    const ConstantsReport& c = constants_of(p);
    const HypothesisReport h = verify_H1_H3(p.ops, p.cfg.mixture, p.cfg.family, c.lambda_numeric,
                                            p.cfg.disc.hermite_q, 1000, p.cfg.budgets.seed + 2);
    bool eps_ok = h.h2_pairs.size() == 3;
    for (const auto& pair : h.h2_pairs) {
      eps_ok = eps_ok && pair.holdout_violations == 0;
    }
    // nu_bar_4 bounds |grad nu|^2 / (2 nu); it vanishes when nu is constant.
    const bool constant_nu = p.cfg.family.gamma_max() == 0.0;
    const bool nu4_ok = constant_nu ? h.nu_bar_4 >= 0.0 && h.nu_bar_4 <= 1e-10 : h.nu_bar_4 > 0.0;
    const bool h1_ok = h.nu_bar_0 > 0.0 && h.nu_bar_1 > 0.0 && h.nu_bar_2 > 0.0 && nu4_ok && h.C_L > 0.0 &&
                       h.nu_bar_3 == 0.5 && h.h12_samples >= 1000 && h.h12_violations == 0;
    const bool h3_ok = h.h3_lambda == c.lambda_numeric;
    ok = ok && h.passed() && h1_ok && eps_ok && h3_ok;
    detail += std::string(name) + (h1_ok ? " H1 ok" : " H1 fail") + (eps_ok ? " H2 ok" : " H2 fail") +
              (h3_ok ? " H3 ok" : " H3 fail") + "; ";
  }
  return {ok, detail};
}

Outcome criterion_8()
{
  const auto t0 = Clock::now();
  const fs::path out = fs::temp_directory_path() / "kgap_acceptance_decay";
  fs::remove_all(out);
  std::ostringstream log;
  std::ostringstream err;
  CommandOptions opt;
  opt.config_path = config_path("decay_reference");
  opt.out_dir = out.string();
  opt.threads = 1;
  const int code = run_command("decay", opt, log, err);
  const double elapsed = seconds_since(t0);
  if (!fs::exists(out / "decay.json")) {
    return {false, "decay command wrote no report (exit " + std::to_string(code) + "): " + err.str()};
  }
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "decay.json"));
  if (!j.contains("fit")) {
    return {false, "no decay fit (exit " + std::to_string(code) + ")"};
  }
  const double tau = j["fit"]["tau_fit"];
  const double C = j["fit"]["C"];
  const double r2 = j["fit"]["r_squared"];
  const double drift = j["conservation_drift_per_unit_time"];
  const bool monotone = j["G_monotone"];

  // Envelope over every recorded sample, not just the fit window.
  std::ifstream csv(out / "trajectory.csv");
  std::string line;
  std::getline(csv, line);
  double envelope = 0.0;
  while (std::getline(csv, line)) {
    std::vector<double> row;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    const double t = row.front();
    const double dist = row[row.size() - 2];
    envelope = std::max(envelope, dist / (C * std::exp(-tau * t)));
  }

  // The reference initial data carries ker(L^m) content outside ker(L).
  Problem& p = problem("hard_spheres_n2");
  const RunConfig cfg = load_config(config_path("decay_reference"));
  const TorusState init = initial_state(p.ops, p.bases, cfg.disc.M_max, cfg.decay.initial,
                                        cfg.decay.amplitude, cfg.budgets.seed + 4);
  const Vector f0 = init.modes[init.modes.size() / 2].coeffs.head(p.ops.L.rows());
  const double extra = (project(p.bases.ker_Lm, f0) - project(p.bases.ker_L, f0)).norm();

  const bool ok = code == 0 && monotone && r2 >= 0.99 && tau > 0.0 && envelope <= 1.05 && drift < 1e-9 &&
                  extra > 1e-6 && elapsed <= 900.0;
  fs::remove_all(out);
  return {ok, "exit " + std::to_string(code) + ", tau " + fmt(tau) + ", r2 " + fmt(r2) + ", envelope(all samples) " +
                  fmt(envelope) + ", G monotone " + (monotone ? "yes" : "no") + ", drift " + fmt(drift) +
                  ", ker(L^m) excess " + fmt(extra) + ", " + fmt(elapsed) + " s"};
}

Outcome criterion_9()
{
  double eig_worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Matrix a = oracle::random_symmetric(k + 1, 5000 + static_cast<std::uint64_t>(k));
    const Vector got = symmetric_eigen(a).values;
    const Vector ref = oracle::sturm_eigenvalues(a);
    eig_worst = std::max(eig_worst, (got - ref).cwiseAbs().maxCoeff());
  }

  Problem& p = problem("hard_spheres_n2");
  const Matrix A = mode_generator(p.ops.L, p.ops.transport, {1, 0, 0});
  const Matrix lhs = expm(0.3 * A) * expm(0.45 * A);
  const Matrix rhs = expm(0.75 * A);
  const double semigroup = max_abs(lhs - rhs);

  // Midpoint self-convergence at t = 1 from a generic start.
  Vector u0 = Vector::Ones(A.rows()) / std::sqrt(static_cast<double>(A.rows()));
  auto run = [&](int steps) {
    const Matrix S = step_matrix(A, 1.0 / steps, Scheme::midpoint);
    Vector u = u0;
    for (int k = 0; k < steps; ++k) {
      u = S * u;
    }
    return u;
  };
  const Vector u1 = run(20);
  const Vector u2 = run(40);
  const Vector u4 = run(80);
  const double ratio = (u1 - u2).norm() / (u2 - u4).norm();

  const bool ok = eig_worst <= 1e-9 && semigroup <= 1e-9 && ratio >= 3.5 && ratio <= 4.5;
  return {ok, "Jacobi vs Sturm " + fmt(eig_worst) + ", expm semigroup " + fmt(semigroup) +
                  ", midpoint self-convergence ratio " + fmt(ratio)};
}

Outcome criterion_10()
{
  const fs::path a = fs::temp_directory_path() / "kgap_acceptance_det_a";
  const fs::path b = fs::temp_directory_path() / "kgap_acceptance_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const RunConfig cfg = load_config(config_path("maxwellian_n1"));
  std::ostringstream log;
  const int ca = cmd_constants(cfg, a.string(), 1, log);
  const int cb = cmd_constants(cfg, b.string(), 1, log);
  const std::string ja = slurp(a / "constants.json");
  const bool same = !ja.empty() && ja == slurp(b / "constants.json");
  fs::remove_all(a);
  fs::remove_all(b);

  Problem& p = problem("hard_spheres_n2");
  const OperatorSet threaded = assemble_operators(p.cfg.mixture, p.cfg.family, p.cfg.disc, 4);
  double dev = max_abs(threaded.L - p.ops.L);
  dev = std::max(dev, max_abs(threaded.Lambda - p.ops.Lambda));
  dev = std::max(dev, max_abs(threaded.Lm - p.ops.Lm));

  const bool ok = ca == 0 && cb == 0 && same && dev <= 1e-12;
  return {ok, std::string("constants JSON ") + (same ? "byte-identical" : "differs") +
                  ", threaded assembly deviation " + fmt(dev)};
}

}  // namespace

int main()
{
  const std::vector<std::function<Outcome()>> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
      criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << k + 1 << (o.pass ? " PASS: " : " FAIL: ") << o.detail << std::endl;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
