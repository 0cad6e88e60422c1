#pragma once

#include <string>
#include <vector>

#include "kgap/hermite_basis.hpp"
#include "kgap/linalg.hpp"

namespace kgap {

/// Normalized global equilibrium: zero mean velocity, unit temperature.
class Mixture
{
 public:
  explicit Mixture(std::vector<double> rho_inf);

  int n() const { return static_cast<int>(rho_.size()); }
  double rho(int i) const { return rho_.at(static_cast<std::size_t>(i)); }
  const std::vector<double>& rho_inf() const { return rho_; }
  double rho_total() const { return total_; }

 private:
  std::vector<double> rho_;
  double total_;
};

enum class MonomialKind
{
  one,
  product,   // v_j v_k
  speed2,    // |v|^2
  speed4,    // |v|^4
};

struct Monomial
{
  MonomialKind kind = MonomialKind::one;
  int j = 0;  // axes for `product`, 0-based
  int k = 0;
};

/// Accepts "1", "v1v2" style products, "|v|^2" and "|v|^4".
Monomial parse_monomial(const std::string& text);

/// Closed-form moment of M_i (species index 0-based).
double maxwellian_moment(const Mixture& mixture, int i, const Monomial& monomial);

/// Coefficients of a ker(L^m) element f_i = M_i^{1/2}(alpha_i + u_i.v + e_i |v|^2).
struct ProjectionCoefficients
{
  std::vector<double> alpha;
  std::vector<Vec3> u;
  std::vector<double> e;
};

/// Coefficient vector of the embedded polynomial M_i^{1/2} p for p in {1, v_k, |v|^2}.
Vector embed_one(const Mixture& mixture, const HermiteBasis& basis, int i);
Vector embed_velocity(const Mixture& mixture, const HermiteBasis& basis, int i, int axis);
Vector embed_energy(const Mixture& mixture, const HermiteBasis& basis, int i);

/// Coefficient vector of the ker(L^m) element with the given coefficients.
Vector embed_coefficients(const Mixture& mixture, const HermiteBasis& basis,
                          const ProjectionCoefficients& c);

/// Orthonormal columns spanning ker(L): n + 4 vectors. Requires N >= 2.
Matrix ker_L_basis(const Mixture& mixture, const HermiteBasis& basis);

/// Orthonormal columns spanning ker(L^m): 5n vectors (per species 1, v, |v|^2).
Matrix ker_Lm_basis(const Mixture& mixture, const HermiteBasis& basis);

/// (alpha_i, u_i, e_i) of Pi^m f from the per-species moment system.
ProjectionCoefficients extract_coefficients(const Mixture& mixture, const HermiteBasis& basis,
                                            const Vector& f);

/// Orthogonal projection onto the span of orthonormal columns q.
Vector project(const Matrix& q, const Vector& f);

/// Both kernel bases, computed once per (mixture, basis).
struct KernelBases
{
  Matrix ker_L;
  Matrix ker_Lm;
};

KernelBases kernel_bases(const Mixture& mixture, const HermiteBasis& basis);

}  // namespace kgap
