#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kgap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Raised when a numerical routine cannot deliver its contract
/// (non-convergence, loss of definiteness, singular systems).
class NumericalError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

struct EigenSystem
{
  Vector values;   ///< ascending
  Matrix vectors;  ///< column k belongs to values(k)
  int sweeps = 0;
};

double max_abs(const Matrix& a);

/// max |A - A^T|
double symmetry_defect(const Matrix& a);

/**
 * Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
 *
 * Rejects input whose asymmetry exceeds `symmetry_tol * max|A|` and throws
 * NumericalError (reporting the remaining off-diagonal norm) when
 * `max_sweeps` sweeps do not converge.
 */
EigenSystem jacobi_eigen(const Matrix& a, double symmetry_tol = 1e-8, int max_sweeps = 50);

/// Modified Gram-Schmidt with one reorthogonalization pass. Columns whose
/// residual norm falls below `drop_tol` are discarded.
Matrix orthonormalize_columns(const Matrix& columns, double drop_tol = 1e-12);

/// Orthonormal basis of the orthogonal complement of span(q); q must have
/// orthonormal columns.
Matrix orthogonal_complement(const Matrix& q);

/// Cascade summation of a sequence; the grouping depends only on the length.
double pairwise_sum(std::span<const double> values);

/// Pairwise reduction of equally shaped matrices in index order.
Matrix pairwise_sum(const std::vector<Matrix>& parts);

/// Lower Cholesky factor; throws NumericalError naming the smallest
/// eigenvalue when `a` is not positive definite.
Matrix cholesky_lower(const Matrix& a, const std::string& what);

/**
 * Eigenvalues of the symmetric-definite pencil (A, B), i.e. of
 * R^{-1} A R^{-T} with B = R R^T. Eigenvectors are returned in the original
 * coordinates and are B-orthonormal.
 */
EigenSystem generalized_eigen(const Matrix& a, const Matrix& b, const std::string& what);

}  // namespace kgap
