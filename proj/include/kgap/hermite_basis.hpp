#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace kgap {

using Vec3 = std::array<double, 3>;
using MultiIndex = std::array<int, 3>;

/// Orthonormal probabilists' Hermite polynomials He_k / sqrt(k!) at x,
/// written to out[0..degree].
void hermite_values(double x, int degree, std::span<double> out);

/**
 * Tensor Hermite basis of total degree <= N for every species.
 *
 * Species i carries e_{a,i}(v) = M_i(v)^{1/2} H_a(v) / rho_i^{1/2}, which is
 * L^2_v-orthonormal, so coefficient dot products are L^2_v inner products.
 * Coefficients are laid out species-major: index(i, a) = i * per_species + a.
 */
class HermiteBasis
{
 public:
  HermiteBasis(int species, int degree);

  int species() const { return species_; }
  int degree() const { return degree_; }
  std::size_t per_species() const { return indices_.size(); }
  std::size_t total_size() const { return indices_.size() * static_cast<std::size_t>(species_); }

  const std::vector<MultiIndex>& indices() const { return indices_; }

  /// Position of a multi-index inside one species block, or -1 if |a| > N.
  int position(const MultiIndex& a) const;

  std::size_t index(int species, std::size_t local) const
  {
    return static_cast<std::size_t>(species) * per_species() + local;
  }

  /// H_a(v) for every multi-index of the block, in block order.
  void evaluate(const Vec3& v, std::span<double> out) const;

 private:
  int species_;
  int degree_;
  std::vector<MultiIndex> indices_;
  std::vector<int> lookup_;  // (N+1)^3 table, -1 outside the simplex
};

/// Number of 3-D multi-indices with total degree <= N: C(N+3, 3).
std::size_t simplex_size(int degree);

}  // namespace kgap
