#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>

#include "kgap/hermite_basis.hpp"
#include "kgap/kernels.hpp"
#include "kgap/linalg.hpp"
#include "kgap/mixture.hpp"
#include "kgap/quadrature.hpp"

namespace kgap {

struct Discretization
{
  int N = 4;
  int hermite_q = 10;
  SphereLevel sphere_level = SphereLevel::coarse;
  int M_max = 2;
  std::size_t max_collision_nodes = 2'000'000'000;
};

// ---------------------------------------------------------------------------
// Collision frequency

struct FrequencyValue
{
  double nu = 0.0;
  double dnu_da = 0.0;  // radial derivative, |grad nu| = |dnu_da|
};

/// nu_i at speed a = |v|, with its radial derivative.
FrequencyValue collision_frequency_radial(const Mixture& mixture, const KernelFamily& family, int i,
                                          double a);

/// nu_i(v) = (2 pi)^{-3/2} sum_j c_ij rho_j int Phi_ij(|v - v*|) e^{-|v*|^2/2} dv*.
double collision_frequency(const Mixture& mixture, const KernelFamily& family, int i, const Vec3& v);

/// min_i sum_j C1 ell_b rho_j 2^{3 gamma_ij / 2} Gamma((gamma_ij + 3)/2) / sqrt(pi);
/// reduces to the closed form with rho_total when all exponents agree.
double nu0_bound(const Mixture& mixture, const KernelFamily& family, double ell_b, double C1);

// ---------------------------------------------------------------------------
// Assembly

/// Sizes of the collision rule in centre-of-mass / relative coordinates.
struct CollisionRuleInfo
{
  int centre_points = 0;  // per axis
  int radial_points = 0;
  int sphere_m = 0;       // sphere rule has m x 2m nodes
  std::size_t nodes = 0;  // per kernel class
  int kernel_classes = 0;
};

CollisionRuleInfo collision_rule_info(const KernelFamily& family, const Discretization& disc);

struct LmLb
{
  Matrix Lm;
  Matrix Lb;
};

struct LambdaK
{
  Matrix Lambda;
  Matrix K;
};

Matrix assemble_L(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                  const Discretization& disc, int threads = 1);
LmLb assemble_Lm_Lb(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                    const Discretization& disc, int threads = 1);
LambdaK assemble_Lambda_K(const Mixture& mixture, const KernelFamily& family,
                          const HermiteBasis& basis, const Discretization& disc, int threads = 1);

/// Multiplication by v_axis (axis 0-based), truncated at degree N. Symmetric.
Matrix assemble_transport(const HermiteBasis& basis, int axis);

/// d/dv_axis expanded in the degree-(N+1) basis: rows follow HermiteBasis(n, N+1).
Matrix assemble_grad_v_full(const HermiteBasis& basis, int axis);

/// d/dv_axis truncated back to degree N (skew-symmetric). The Frobenius norm
/// of the discarded degree-(N+1) block is written to `discarded` when given.
Matrix assemble_grad_v(const HermiteBasis& basis, int axis, double* discarded = nullptr);

/// Every discrete operator on one basis. L = K - Lambda = Lm + Lb, HGram = Lambda,
/// vgram = sum_axis grad_v_full^T grad_v_full (the exact |grad_v f|^2 form).
struct OperatorSet
{
  HermiteBasis basis{1, 0};
  Matrix L;
  Matrix Lm;
  Matrix Lb;
  Matrix Lambda;
  Matrix K;
  Matrix HGram;
  std::array<Matrix, 3> transport;
  std::array<Matrix, 3> grad_v;
  std::array<Matrix, 3> grad_v_full;
  Matrix vgram;
  double grad_truncation = 0.0;
  CollisionRuleInfo rule;
  std::map<std::string, std::string> meta;
};

OperatorSet assemble_operators(const Mixture& mixture, const KernelFamily& family,
                               const Discretization& disc, int threads = 1);

/// Row-major CSV with a '#' header line carrying the role and metadata.
void write_operator_csv(const std::string& path, const std::string& role, const Matrix& m,
                        const std::map<std::string, std::string>& meta);

}  // namespace kgap
