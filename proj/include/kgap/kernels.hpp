#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kgap {

/// Kinetic part Phi(r) = C r^gamma.
struct PowerLaw
{
  double C = 1.0;
  double gamma = 0.0;

  /// r^gamma with the limit value at r = 0 (0 for gamma > 0, 1 for gamma = 0).
  double operator()(double r) const;
};

/// Angular part b(c) = sum_k coeffs[k] c^k with c = cos(theta).
struct AngularPolynomial
{
  std::vector<double> coeffs{1.0};

  double operator()(double c) const;
  double derivative(double c) const;
  bool is_even() const;
  int degree() const;
  /// int_{-1}^{1} b(c) dc in closed form.
  double integral() const;
};

struct KernelFamily
{
  int n = 1;
  std::vector<PowerLaw> phi;         // n x n, row-major
  std::vector<AngularPolynomial> b;  // n x n, row-major
  // Optional constants of the assumptions; missing values are derived.
  std::optional<double> C1;
  std::optional<double> C2;
  std::optional<double> delta;
  std::optional<double> C3;
  std::optional<double> C4;
  std::optional<double> beta;

  const PowerLaw& kinetic(int i, int j) const { return phi[static_cast<std::size_t>(i * n + j)]; }
  const AngularPolynomial& angular(int i, int j) const { return b[static_cast<std::size_t>(i * n + j)]; }

  /// Throws std::invalid_argument on malformed descriptors (sizes, C <= 0,
  /// gamma outside [0, 1], delta outside (0, 1), non-finite values).
  void validate() const;

  double gamma_min() const;
  double gamma_max() const;
};

KernelFamily uniform_family(int n, PowerLaw phi, AngularPolynomial b);

/// B_ij(s, c) = Phi_ij(s) b_ij(c); s > 0 and c in [-1, 1].
double evaluate_B(const KernelFamily& family, int i, int j, double s, double cos_theta);

/// 2 pi int_0^pi b(cos theta) sin theta d theta.
double angular_mass(const AngularPolynomial& b);

/// min over pairs of int_0^pi b_ij(cos theta) sin theta d theta (adaptive Gauss-Kronrod).
double compute_ell_b(const KernelFamily& family);

/// Grid estimate of C^b: 32 x 32 direction pairs, Lebedev-110 for sigma_3.
double compute_C_b(const KernelFamily& family);

struct KernelConstants
{
  double ell_b = 0.0;
  double C_b = 0.0;
  double beta_eff = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double delta = 0.5;
  double C3 = 0.0;
  double C4 = 0.0;
};

struct AssumptionVerdict
{
  std::string name;  // "A1" ... "A6"
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;
};

struct AuditReport
{
  std::vector<AssumptionVerdict> verdicts;
  KernelConstants constants;
  std::size_t samples = 0;

  bool passed() const;
  bool passed_except(const std::vector<std::string>& waived) const;
  const AssumptionVerdict& verdict(const std::string& name) const;
};

/// Checks (A1)-(A6). sample_budget >= 1000 points per sampled bound.
AuditReport audit_assumptions(const KernelFamily& family, std::size_t sample_budget,
                              std::uint64_t seed);

}  // namespace kgap
