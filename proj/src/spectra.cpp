#include "kgap/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "kgap/parallel.hpp"
#include "kgap/quadrature.hpp"

namespace kgap {

EigenSystem symmetric_eigen(const Matrix& a)
{
  if (a.rows() > 2000) {
    throw std::invalid_argument("symmetric_eigen: dimension above 2000");
  }
  return jacobi_eigen(a, 1e-8, 50);
}

double generalized_gap(const Matrix& L, const Matrix& H, const Matrix& kernel)
{
  const Matrix z = orthogonal_complement(kernel);
  const Matrix a = -(z.transpose() * L * z);
  const Matrix b = z.transpose() * H * z;
  const EigenSystem sys = generalized_eigen(0.5 * (a + a.transpose()), 0.5 * (b + b.transpose()),
                                            "HGram restricted to the kernel complement");
  return sys.values(0);
}

double compute_Cm(const OperatorSet& ops, const Matrix& ker_Lm)
{
  return generalized_gap(ops.Lm, ops.HGram, ker_Lm);
}

Matrix random_unit_columns(Eigen::Index rows, std::size_t count, std::uint64_t seed)
{
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      out(r, c) = normal(rng);
    }
    out.col(c).normalize();
  }
  return out;
}

// ---------------------------------------------------------------------------
// D^b

DbEstimate compute_Db(const Mixture& mixture, const KernelFamily& family, std::size_t samples,
                      std::uint64_t seed, int threads)
{
  if (samples < 100000) {
    throw std::invalid_argument("compute_Db: Monte-Carlo budget must be >= 1e5");
  }
  const int n = mixture.n();
  const auto pairs = static_cast<std::size_t>(n * n);
  constexpr std::size_t blocks = 64;
  std::vector<std::vector<double>> values(pairs, std::vector<double>(samples, 0.0));
  const CollisionSampler root(seed);
  parallel_for(blocks, threads, [&](std::size_t blk) {
    CollisionSampler sampler = root.substream(blk);
    const std::size_t lo = blk * samples / blocks;
    const std::size_t hi = (blk + 1) * samples / blocks;
    for (std::size_t k = lo; k < hi; ++k) {
      const CollisionSample s = sampler.next();
      const Vec3 rel{s.v[0] - s.v_star[0], s.v[1] - s.v_star[1], s.v[2] - s.v_star[2]};
      const double speed = norm(rel);
      if (speed == 0.0) {
        continue;
      }
      const CollisionPair c = post_collision(s.v, s.v_star, s.sigma);
      const Vec3 dv{s.v[0] - c.v_prime[0], s.v[1] - c.v_prime[1], s.v[2] - c.v_prime[2]};
      const double de = dot(c.v_prime, c.v_prime) - dot(s.v, s.v);
      const double g = std::min(dot(dv, dv) / 3.0, de * de);
      const double ct = cos_theta(s.v, s.v_star, s.sigma);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          values[static_cast<std::size_t>(i * n + j)][k] =
              s.weight * mixture.rho(i) * mixture.rho(j) * evaluate_B(family, i, j, speed, ct) * g;
        }
      }
    }
  });
  DbEstimate est;
  est.samples = samples;
  est.value = std::numeric_limits<double>::infinity();
  est.pair_values.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  est.pair_errors = est.pair_values;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& y = values[static_cast<std::size_t>(i * n + j)];
      const double mean = pairwise_sum(y) / static_cast<double>(samples);
      std::vector<double> sq(samples);
      for (std::size_t k = 0; k < samples; ++k) {
        sq[k] = (y[k] - mean) * (y[k] - mean);
      }
      const double se =
          std::sqrt(pairwise_sum(sq) / static_cast<double>(samples - 1) / static_cast<double>(samples));
      est.pair_values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = mean;
      est.pair_errors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = se;
      if (mean < est.value) {
        est.value = mean;
        est.std_err = se;
        est.pair_i = i;
        est.pair_j = j;
      }
    }
  }
  if (!(est.value > 3.0 * est.std_err)) {
    std::ostringstream msg;
    msg << "compute_Db: estimate " << est.value << " is not above 3 standard errors (" << est.std_err
        << "); increase the Monte-Carlo budget";
    throw NumericalError(msg.str());
  }
  return est;
}

double compute_Ck(const Mixture& mixture, const Matrix& hgram, const Matrix& psi)
{
  const Matrix g = psi.transpose() * hgram * psi;
  return 60.0 * mixture.n() * mixture.rho_total() * max_abs(g);
}

EtaLambda explicit_lambda(double C_m, double D_b, double C_k)
{
  if (!(C_m > 0.0) || !(D_b > 0.0) || !(C_k > 0.0)) {
    throw std::invalid_argument("explicit_lambda: C_m, D_b and C_k must be positive");
  }
  EtaLambda out;
  out.eta = std::min(1.0, 4.0 * C_m * C_k / (16.0 * C_k + D_b));
  out.lambda = out.eta * D_b / (8.0 * C_k);
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum

namespace {

std::pair<double, double> nu_range_at_nodes(const Mixture& mixture, const KernelFamily& family, int q)
{
  const QuadratureRule rule = hermite_rule_3d(q);
  double best = 0.0;
  double least = std::numeric_limits<double>::infinity();
  std::map<double, double> cache;
  for (int i = 0; i < mixture.n(); ++i) {
    cache.clear();
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const double a = norm(rule.point(k));
      auto it = cache.find(a);
      if (it == cache.end()) {
        it = cache.emplace(a, collision_frequency_radial(mixture, family, i, a).nu).first;
      }
      best = std::max(best, it->second);
      least = std::min(least, it->second);
    }
  }
  return {least, best};
}

}  // namespace

SpectralReport spectral_report(const OperatorSet& ops, const Mixture& mixture,
                               const KernelFamily& family, const Matrix& ker_L, double nu0,
                               int hermite_q)
{
  SpectralReport rep;
  rep.expected_kernel_dim = mixture.n() + 4;
  rep.essential_onset = nu0;
  rep.gap_numeric = generalized_gap(ops.L, ops.HGram, ker_L);
  const EigenSystem full = generalized_eigen(-ops.L, ops.HGram, "HGram");
  rep.eigenvalues = full.values;
  rep.L_eigenvalues = symmetric_eigen(ops.L).values;
  rep.Lambda_eigenvalues = symmetric_eigen(ops.Lambda).values;
  rep.L_norm = std::max(std::abs(rep.L_eigenvalues(0)),
                        std::abs(rep.L_eigenvalues(rep.L_eigenvalues.size() - 1)));
  rep.threshold = std::max(1e-8 * rep.L_norm, rep.gap_numeric / 10.0);
  rep.kernel_dim = 0;
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k) {
    if (rep.eigenvalues(k) < rep.threshold) {
      ++rep.kernel_dim;
    }
  }
  const auto next = static_cast<Eigen::Index>(rep.expected_kernel_dim);
  rep.isolation_ratio = next < rep.eigenvalues.size() ? rep.eigenvalues(next) / rep.gap_numeric : 0.0;
  std::tie(rep.nu_min_nodes, rep.nu_max_nodes) = nu_range_at_nodes(mixture, family, hermite_q);
  return rep;
}

ConstantsReport compute_constants(const OperatorSet& ops, const Mixture& mixture,
                                  const KernelFamily& family, const KernelConstants& kc,
                                  const KernelBases& bases, std::size_t mc_samples,
                                  std::uint64_t seed, int threads)
{
  ConstantsReport rep;
  rep.ell_b = kc.ell_b;
  rep.C_b = kc.C_b;
  rep.nu0 = nu0_bound(mixture, family, kc.ell_b, kc.C1);
  rep.C_m = compute_Cm(ops, bases.ker_Lm);
  rep.D_b = compute_Db(mixture, family, mc_samples, seed, threads);
  rep.C_k = compute_Ck(mixture, ops.HGram, bases.ker_Lm);
  const EtaLambda el = explicit_lambda(rep.C_m, rep.D_b.value, rep.C_k);
  rep.eta = el.eta;
  rep.lambda_explicit = el.lambda;
  rep.lambda_numeric = generalized_gap(ops.L, ops.HGram, bases.ker_L);
  std::ostringstream mc;
  mc << "monte_carlo(n_samples=" << rep.D_b.samples << ", std_err=" << rep.D_b.std_err << ")";
  rep.provenance = {
      {"nu0", "analytic"},
      {"ell_b", "quadrature"},
      {"C_b", "quadrature(grid estimate, non-rigorous)"},
      {"C_m", "numeric_eigen"},
      {"D_b", mc.str()},
      {"C_k", "quadrature"},
      {"eta", "analytic"},
      {"lambda_explicit", "analytic"},
      {"lambda_numeric", "numeric_eigen"},
  };
  return rep;
}

// ---------------------------------------------------------------------------
// Step inequalities

bool StepLedger::passed() const
{
  for (const auto& e : entries) {
    if (e.violations > 0) {
      return false;
    }
  }
  return true;
}

namespace {

class Tally
{
 public:
  Tally(std::string name, double tol)
      : tol_(tol)
  {
    entry_.name = std::move(name);
    entry_.worst_margin = std::numeric_limits<double>::infinity();
  }

  void add(double margin, std::size_t sample)
  {
    ++entry_.samples;
    if (margin < entry_.worst_margin) {
      entry_.worst_margin = margin;
      if (margin < -tol_) {
        std::ostringstream w;
        w << "sample " << sample << ": margin " << margin;
        entry_.witness = w.str();
      }
    }
    if (margin < -tol_) {
      ++entry_.violations;
    }
  }

  LedgerEntry entry() const { return entry_; }

 private:
  double tol_;
  LedgerEntry entry_;
};

double h_norm2(const Matrix& h, const Vector& g)
{
  return g.dot(h * g);
}

double difference_sum(const ProjectionCoefficients& c)
{
  double s = 0.0;
  const std::size_t n = c.e.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double d = c.u[i][k] - c.u[j][k];
        s += d * d;
      }
      s += (c.e[i] - c.e[j]) * (c.e[i] - c.e[j]);
    }
  }
  return s;
}

}  // namespace

StepLedger verify_step_lemmas(const OperatorSet& ops, const Mixture& mixture,
                              const KernelBases& bases, const ConstantsReport& constants,
                              std::size_t samples, std::uint64_t seed, double tolerance)
{
  StepLedger ledger;
  ledger.tolerance = tolerance;
  const double Cm = constants.C_m;
  const double Db = constants.D_b.value;
  const double Ck = constants.C_k;
  const double eta_ortho = std::min(1.0, Cm / 8.0);
  const double eta = constants.eta;

  Tally ortho("ortho(eta=min{1,C_m/8})", tolerance);
  Tally ortho_thm("ortho(eta=theorem)", tolerance);
  Tally lb("Lb", tolerance);
  Tally diff("diff", tolerance);
  Tally chain("full_chain", tolerance);
  Tally theorem("gap_explicit", tolerance);
  Tally numeric("gap_numeric", tolerance);

  const Matrix f_all = random_unit_columns(ops.L.rows(), samples, seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector f = f_all.col(static_cast<Eigen::Index>(s));
    const Vector fpar = project(bases.ker_Lm, f);
    const Vector fperp = f - fpar;
    const Vector fker = project(bases.ker_L, f);
    const double negLf = -f.dot(ops.L * f);
    const double perp_h = h_norm2(ops.HGram, fperp);
    const double off_ker_h = h_norm2(ops.HGram, f - fker);
    const double lb_par = fpar.dot(ops.Lb * fpar);
    const ProjectionCoefficients coeff = extract_coefficients(mixture, ops.basis, f);
    const double dsum = difference_sum(coeff);

    ortho.add(negLf - ((Cm - 4.0 * eta_ortho) * perp_h - 0.5 * eta_ortho * lb_par), s);
    ortho_thm.add(negLf - ((Cm - 4.0 * eta) * perp_h - 0.5 * eta * lb_par), s);
    lb.add(-lb_par - 0.25 * Db * dsum, s);
    diff.add(dsum - (off_ker_h - 2.0 * perp_h) / Ck, s);
    chain.add(negLf - ((Cm - 4.0 * eta - eta * Db / (4.0 * Ck)) * perp_h +
                       eta * Db / (8.0 * Ck) * off_ker_h),
              s);
    theorem.add(negLf - constants.lambda_explicit * off_ker_h, s);
    numeric.add(negLf - constants.lambda_numeric * off_ker_h, s);
  }

  // Weighted-variance inequalities on random tuples.
  Tally jensen_u("jensen_u", tolerance);
  Tally jensen_e("jensen_e", tolerance);
  std::mt19937_64 rng(splitmix64(seed ^ 0x5bd1e995ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> mass(0.05, 5.0);
  std::uniform_int_distribution<int> count(1, 5);
  for (std::size_t s = 0; s < samples; ++s) {
    const int n = count(rng);
    std::vector<double> rho(static_cast<std::size_t>(n));
    std::vector<Vec3> u(static_cast<std::size_t>(n));
    std::vector<double> e(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      rho[k] = mass(rng);
      total += rho[k];
      for (auto& x : u[k]) {
        x = normal(rng);
      }
      e[k] = normal(rng);
    }
    double su2 = 0.0;
    Vec3 mu{0.0, 0.0, 0.0};
    double se2 = 0.0;
    double me = 0.0;
    double ru = 0.0;
    double re = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(i);
      const double w = rho[a] / total;
      su2 += w * dot(u[a], u[a]);
      for (std::size_t k = 0; k < 3; ++k) {
        mu[k] += w * u[a][k];
      }
      se2 += w * e[a] * e[a];
      me += w * e[a];
      for (int j = 0; j < n; ++j) {
        const auto b = static_cast<std::size_t>(j);
        for (std::size_t k = 0; k < 3; ++k) {
          ru += (u[a][k] - u[b][k]) * (u[a][k] - u[b][k]);
        }
        re += (e[a] - e[b]) * (e[a] - e[b]);
      }
    }
    jensen_u.add(ru - (su2 - dot(mu, mu)), s);
    jensen_e.add(re - (se2 - me * me), s);
  }

  for (const Tally* t : {&ortho, &ortho_thm, &lb, &diff, &jensen_u, &jensen_e, &chain, &theorem, &numeric}) {
    ledger.entries.push_back(t->entry());
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Hypotheses

bool HypothesisReport::passed(double tol) const
{
  if (!(nu_bar_0 > 0.0 && nu_bar_1 > 0.0 && nu_bar_2 > 0.0 && nu_bar_4 >= 0.0 && C_L > 0.0)) {
    return false;
  }
  if (h12_violations > 0 || !h2_monotone || !(h3_lambda > 0.0)) {
    return false;
  }
  for (const auto& p : h2_pairs) {
    if (p.holdout_violations > 0 || p.holdout_margin < -tol) {
      return false;
    }
  }
  return true;
}

HypothesisReport verify_H1_H3(const OperatorSet& ops, const Mixture& mixture,
                              const KernelFamily& family, double lambda_numeric, int hermite_q,
                              std::size_t samples, std::uint64_t seed)
{
  HypothesisReport rep;
  rep.grad_truncation = ops.grad_truncation;
  rep.h3_lambda = lambda_numeric;

  // (H1.1): L^2 Gram is the identity, the H Gram is Lambda itself.
  rep.nu_bar_0 = symmetric_eigen(ops.HGram).values(0);
  const EigenSystem lam = generalized_eigen(ops.Lambda, ops.HGram, "HGram");
  rep.nu_bar_1 = lam.values(0);
  rep.nu_bar_2 = lam.values(lam.values.size() - 1);
  const EigenSystem cl = generalized_eigen(ops.L, ops.HGram, "HGram");
  rep.C_L = std::max(std::abs(cl.values(0)), std::abs(cl.values(cl.values.size() - 1)));

  // nu and grad nu at the Hermite nodes, plus a radial scan for nu_bar_4.
  const int n = mixture.n();
  const QuadratureRule rule = hermite_rule_3d(hermite_q);
  const auto nodes = static_cast<Eigen::Index>(rule.size());
  Matrix nu(nodes, n);
  std::vector<Matrix> dnu(3, Matrix(nodes, n));
  for (int i = 0; i < n; ++i) {
    std::map<double, FrequencyValue> cache;
    for (Eigen::Index k = 0; k < nodes; ++k) {
      const Vec3 x = rule.point(static_cast<std::size_t>(k));
      const double a = norm(x);
      auto it = cache.find(a);
      if (it == cache.end()) {
        it = cache.emplace(a, collision_frequency_radial(mixture, family, i, a)).first;
      }
      nu(k, i) = it->second.nu;
      for (int ax = 0; ax < 3; ++ax) {
        dnu[static_cast<std::size_t>(ax)](k, i) = a > 0.0 ? it->second.dnu_da * x[static_cast<std::size_t>(ax)] / a : 0.0;
      }
      rep.nu_bar_4 = std::max(rep.nu_bar_4, it->second.dnu_da * it->second.dnu_da / (2.0 * it->second.nu));
    }
    for (int s = 0; s <= 400; ++s) {
      const FrequencyValue fv = collision_frequency_radial(mixture, family, i, 0.025 * s);
      rep.nu_bar_4 = std::max(rep.nu_bar_4, fv.dnu_da * fv.dnu_da / (2.0 * fv.nu));
    }
  }

  // (H1.2) on random f, integrated node by node.
  const HermiteBasis up(1, ops.basis.degree() + 1);
  const auto d = static_cast<Eigen::Index>(ops.basis.per_species());
  const auto d1 = static_cast<Eigen::Index>(up.per_species());
  Matrix table(nodes, d1);
  {
    Vector h(d1);
    for (Eigen::Index k = 0; k < nodes; ++k) {
      up.evaluate(rule.point(static_cast<std::size_t>(k)), {h.data(), static_cast<std::size_t>(d1)});
      table.row(k) = h.transpose();
    }
  }
  Vector w(nodes);
  for (Eigen::Index k = 0; k < nodes; ++k) {
    w(k) = rule.weights[static_cast<std::size_t>(k)];
  }
  const Matrix F = random_unit_columns(ops.L.rows(), samples, seed);
  std::array<Matrix, 3> G;
  for (int ax = 0; ax < 3; ++ax) {
    G[static_cast<std::size_t>(ax)] = ops.grad_v_full[static_cast<std::size_t>(ax)] * F;
  }
  Vector lhs = Vector::Zero(static_cast<Eigen::Index>(samples));
  Vector rhs = Vector::Zero(static_cast<Eigen::Index>(samples));
  for (int i = 0; i < n; ++i) {
    const Matrix p = table.leftCols(d) * F.middleRows(i * d, d);
    Matrix grad2 = Matrix::Zero(nodes, static_cast<Eigen::Index>(samples));
    Matrix cross = Matrix::Zero(nodes, static_cast<Eigen::Index>(samples));
    for (int ax = 0; ax < 3; ++ax) {
      const auto s = static_cast<std::size_t>(ax);
      const Matrix q = table * G[s].middleRows(i * d1, d1);
      grad2 += q.cwiseProduct(q);
      cross += q.cwiseProduct(dnu[s].col(i).asDiagonal() * p);
    }
    const Matrix weighted = nu.col(i).asDiagonal() * grad2;
    lhs += (weighted + cross).transpose() * w;
    rhs += (0.5 * weighted - rep.nu_bar_4 * p.cwiseProduct(p)).transpose() * w;
  }
  rep.h12_samples = samples;
  rep.h12_worst_margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < lhs.size(); ++s) {
    const double margin = lhs(s) - rhs(s);
    rep.h12_worst_margin = std::min(rep.h12_worst_margin, margin);
    if (margin < -1e-8 * std::max(1.0, std::abs(lhs(s)))) {
      ++rep.h12_violations;
    }
  }

  // (H2): C(eps) = max(0, lambda_max(sym(V K) - eps V)) certifies the whole space.
  const Matrix vk = ops.vgram * ops.K;
  const Matrix sym = 0.5 * (vk + vk.transpose());
  const Matrix holdout = random_unit_columns(ops.L.rows(), samples, seed ^ 0x9e3779b97f4a7c15ULL);
  double previous = -1.0;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    H2Pair pair;
    pair.epsilon = eps;
    const Matrix m = sym - eps * ops.vgram;
    const EigenSystem es = symmetric_eigen(0.5 * (m + m.transpose()));
    pair.C_certified = std::max(0.0, es.values(es.values.size() - 1));
    pair.C_sample_fit = 0.0;
    for (Eigen::Index s = 0; s < F.cols(); ++s) {
      const Vector f = F.col(s);
      pair.C_sample_fit = std::max(pair.C_sample_fit, f.dot(m * f));
    }
    pair.holdout_margin = std::numeric_limits<double>::infinity();
    const double scale = std::max(1.0, max_abs(sym));
    for (Eigen::Index s = 0; s < holdout.cols(); ++s) {
      const Vector f = holdout.col(s);
      const double margin = pair.C_certified - f.dot(m * f);
      pair.holdout_margin = std::min(pair.holdout_margin, margin);
      if (margin < -1e-10 * scale) {
        ++pair.holdout_violations;
      }
    }
    if (pair.C_certified < previous) {
      rep.h2_monotone = false;
    }
    previous = pair.C_certified;
    rep.h2_pairs.push_back(pair);
  }
  return rep;
}

}  // namespace kgap
