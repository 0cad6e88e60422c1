#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kgap/galerkin.hpp"
#include "kgap/kernels.hpp"
#include "kgap/linalg.hpp"
#include "kgap/mixture.hpp"

namespace kgap {

/// Full symmetric eigendecomposition (cyclic Jacobi), ascending.
EigenSystem symmetric_eigen(const Matrix& a);

/**
 * min over f outside the span of `kernel` of (-f^T L f) / (g^T H g) with
 * g = f - Pi f. The kernel is deflated with an orthonormal complement and the
 * reduced pencil is solved through the Cholesky factor of H.
 */
double generalized_gap(const Matrix& L, const Matrix& H, const Matrix& kernel);

/// Numerically certified mono-species gap: generalized_gap(Lm, HGram, ker(L^m)).
double compute_Cm(const OperatorSet& ops, const Matrix& ker_Lm);

struct DbEstimate
{
  double value = 0.0;
  double std_err = 0.0;
  std::size_t samples = 0;
  int pair_i = 0;
  int pair_j = 0;
  std::vector<std::vector<double>> pair_values;   // n x n
  std::vector<std::vector<double>> pair_errors;   // n x n
};

/// Monte-Carlo D^b with common samples for every pair. Throws NumericalError
/// when the minimum is not above three standard errors.
DbEstimate compute_Db(const Mixture& mixture, const KernelFamily& family, std::size_t samples,
                      std::uint64_t seed, int threads = 1);

/// 60 n rho_total max_{k,l} |psi_k^T HGram psi_l|.
double compute_Ck(const Mixture& mixture, const Matrix& hgram, const Matrix& psi);

struct EtaLambda
{
  double eta = 0.0;
  double lambda = 0.0;
};

EtaLambda explicit_lambda(double C_m, double D_b, double C_k);

struct SpectralReport
{
  Vector eigenvalues;         // generalized eigenvalues of (-L, HGram), ascending
  Vector L_eigenvalues;       // standard eigenvalues of L, ascending
  Vector Lambda_eigenvalues;  // standard eigenvalues of Lambda, ascending
  int kernel_dim = 0;
  int expected_kernel_dim = 0;
  double threshold = 0.0;
  double gap_numeric = 0.0;
  double essential_onset = 0.0;  // nu0
  double L_norm = 0.0;
  double nu_min_nodes = 0.0;   // min_i nu_i over the 3-D Hermite nodes
  double nu_max_nodes = 0.0;
  double isolation_ratio = 0.0;  // (n+5)-th eigenvalue / gap_numeric
};

SpectralReport spectral_report(const OperatorSet& ops, const Mixture& mixture,
                               const KernelFamily& family, const Matrix& ker_L, double nu0,
                               int hermite_q);

struct ConstantsReport
{
  double nu0 = 0.0;
  double ell_b = 0.0;
  double C_b = 0.0;
  double C_m = 0.0;
  DbEstimate D_b;
  double C_k = 0.0;
  double eta = 0.0;
  double lambda_explicit = 0.0;
  double lambda_numeric = 0.0;
  std::map<std::string, std::string> provenance;

  double ratio() const { return lambda_explicit / lambda_numeric; }
};

ConstantsReport compute_constants(const OperatorSet& ops, const Mixture& mixture,
                                  const KernelFamily& family, const KernelConstants& kc,
                                  const KernelBases& bases, std::size_t mc_samples,
                                  std::uint64_t seed, int threads = 1);

struct LedgerEntry
{
  std::string name;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // min over samples of (rhs side - lhs side); >= -tol is a pass
  std::string witness;
};

struct StepLedger
{
  std::vector<LedgerEntry> entries;
  double tolerance = 1e-8;
  bool passed() const;
};

/// Random-sample checks of the step inequalities behind the explicit gap.
StepLedger verify_step_lemmas(const OperatorSet& ops, const Mixture& mixture,
                              const KernelBases& bases, const ConstantsReport& constants,
                              std::size_t samples, std::uint64_t seed, double tolerance = 1e-8);

struct H2Pair
{
  double epsilon = 0.0;
  double C_certified = 0.0;  // max over the whole discrete space
  double C_sample_fit = 0.0; // max over the fitting sample
  double holdout_margin = 0.0;
  std::size_t holdout_violations = 0;
};

struct HypothesisReport
{
  double nu_bar_0 = 0.0;
  double nu_bar_1 = 0.0;
  double nu_bar_2 = 0.0;
  double nu_bar_3 = 0.5;
  double nu_bar_4 = 0.0;
  double C_L = 0.0;
  std::size_t h12_samples = 0;
  std::size_t h12_violations = 0;
  double h12_worst_margin = 0.0;
  std::vector<H2Pair> h2_pairs;
  bool h2_monotone = true;
  double h3_lambda = 0.0;
  double grad_truncation = 0.0;
  bool passed(double tol = 1e-8) const;
};

HypothesisReport verify_H1_H3(const OperatorSet& ops, const Mixture& mixture,
                              const KernelFamily& family, double lambda_numeric, int hermite_q,
                              std::size_t samples, std::uint64_t seed);

/// Unit-norm standard normal coefficient vectors, one per column.
Matrix random_unit_columns(Eigen::Index rows, std::size_t count, std::uint64_t seed);

}  // namespace kgap
