#include "kgap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace kgap {

double max_abs(const Matrix& a)
{
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

double symmetry_defect(const Matrix& a)
{
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("symmetry_defect: matrix is not square");
  }
  return a.size() == 0 ? 0.0 : (a - a.transpose()).cwiseAbs().maxCoeff();
}

EigenSystem jacobi_eigen(const Matrix& input, double symmetry_tol, int max_sweeps)
{
  const Eigen::Index n = input.rows();
  if (input.cols() != n) {
    throw std::invalid_argument("jacobi_eigen: matrix is not square");
  }
  const double scale = max_abs(input);
  if (symmetry_defect(input) > symmetry_tol * std::max(scale, 1e-300)) {
    std::ostringstream msg;
    msg << "jacobi_eigen: input is not symmetric (max |A - A^T| = " << symmetry_defect(input)
        << ", max |A| = " << scale << ")";
    throw std::invalid_argument(msg.str());
  }

  // Work on the symmetrized copy; column-major storage makes the column
  // updates contiguous, rows are mirrored afterwards.
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  EigenSystem out;

  auto off_norm = [&]() {
    double s = 0.0;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) {
        s += a(p, q) * a(p, q);
      }
    }
    return std::sqrt(2.0 * s);
  };

  const double frob = a.norm();
  if (frob == 0.0 || n <= 1) {
    out.values = a.diagonal();
    out.vectors = v;
    return out;
  }
  const double target = 1e-15 * frob;

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const double off = off_norm();
    if (off <= target) {
      break;
    }
    // Skip rotations whose pivot cannot move the diagonal in the early sweeps.
    const double small = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= small || apq == 0.0) {
          continue;
        }
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (sweep > 3 && std::abs(apq) < 1e-18 * std::min(std::abs(app), std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        double* colp = a.col(p).data();
        double* colq = a.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = colp[k];
          const double akq = colq[k];
          colp[k] = c * akp - s * akq;
          colq[k] = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          a(p, k) = colp[k];
          a(q, k) = colq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;

        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }
  if (sweep == max_sweeps && off_norm() > target) {
    std::ostringstream msg;
    msg << "jacobi_eigen: no convergence after " << max_sweeps << " sweeps (off-diagonal norm "
        << off_norm() << ")";
    throw NumericalError(msg.str());
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  out.sweeps = sweep;
  return out;
}

Matrix orthonormalize_columns(const Matrix& columns, double drop_tol)
{
  std::vector<Vector> kept;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Vector x = columns.col(j);
    const double original = x.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) {
        x -= q.dot(x) * q;
      }
    }
    const double r = x.norm();
    if (r <= drop_tol * std::max(1.0, original)) {
      continue;
    }
    kept.push_back(x / r);
  }
  Matrix q(columns.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    q.col(static_cast<Eigen::Index>(j)) = kept[j];
  }
  return q;
}

Matrix orthogonal_complement(const Matrix& q)
{
  const Eigen::Index d = q.rows();
  const Eigen::Index k = q.cols();
  if (k == 0) {
    return Matrix::Identity(d, d);
  }
  Eigen::HouseholderQR<Matrix> qr(q);
  Matrix full = qr.householderQ() * Matrix::Identity(d, d);
  return full.rightCols(d - k);
}

double pairwise_sum(std::span<const double> values)
{
  if (values.empty()) {
    return 0.0;
  }
  if (values.size() <= 8) {
    double s = 0.0;
    for (double x : values) {
      s += x;
    }
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

Matrix pairwise_range(const std::vector<Matrix>& parts, std::size_t lo, std::size_t hi)
{
  if (hi - lo == 1) {
    return parts[lo];
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_range(parts, lo, mid) + pairwise_range(parts, mid, hi);
}

}  // namespace

Matrix pairwise_sum(const std::vector<Matrix>& parts)
{
  if (parts.empty()) {
    throw std::invalid_argument("pairwise_sum: no matrices");
  }
  return pairwise_range(parts, 0, parts.size());
}

Matrix cholesky_lower(const Matrix& a, const std::string& what)
{
  Eigen::LLT<Matrix> llt(0.5 * (a + a.transpose()));
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Vector d = Matrix(llt.matrixL()).diagonal();
    ok = d.minCoeff() > 0.0 && std::isfinite(d.sum());
  }
  if (!ok) {
    const double smallest = jacobi_eigen(a, 1e-6).values(0);
    std::ostringstream msg;
    msg << what << " is not positive definite (smallest eigenvalue " << smallest << ")";
    throw NumericalError(msg.str());
  }
  return llt.matrixL();
}

EigenSystem generalized_eigen(const Matrix& a, const Matrix& b, const std::string& what)
{
  const Matrix r = cholesky_lower(b, what);
  // C = R^{-1} A R^{-T}
  const auto tri = r.triangularView<Eigen::Lower>();
  Matrix tmp = tri.solve(a);
  Matrix c = tri.solve(tmp.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  EigenSystem sys = jacobi_eigen(c, 1e-8);
  sys.vectors = r.transpose().triangularView<Eigen::Upper>().solve(sys.vectors);
  return sys;
}

}  // namespace kgap
