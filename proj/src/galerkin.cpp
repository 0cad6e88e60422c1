#include "kgap/galerkin.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "kgap/parallel.hpp"

namespace kgap {

// ---------------------------------------------------------------------------
// Collision frequency

namespace {

constexpr double pi = std::numbers::pi;

/// int |v - v*|^gamma (2 pi)^{-3/2} e^{-|v*|^2/2} dv* at |v| = a, reduced to
/// one radial integral, together with its derivative in a.
FrequencyValue radial_average(double gamma, double a)
{
  if (gamma == 0.0) {
    return {1.0, 0.0};
  }
  const double norm = std::sqrt(2.0 / pi);
  auto kernel = [&](double s, bool derivative) {
    const double x = s * a;
    const double base = std::exp(-0.5 * (s * s + a * a));
    double g = 0.0;
    double dg = 0.0;
    if (x < 1e-2) {
      const double x2 = x * x;
      g = base * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
      dg = base * (x / 3.0 + x * x2 / 30.0 + x * x2 * x2 / 840.0);
    }
    else {
      const double em = std::exp(-0.5 * (s - a) * (s - a));
      const double ep = std::exp(-0.5 * (s + a) * (s + a));
      g = 0.5 * (em - ep) / x;
      dg = (0.5 * x * (em + ep) - 0.5 * (em - ep)) / (x * x);
    }
    const double w = std::pow(s, gamma + 2.0);
    return derivative ? w * (-a * g + s * dg) : w * g;
  };
  using boost::math::quadrature::gauss_kronrod;
  const double lo = std::max(0.0, a - 12.0);
  const double hi = a + 12.0;
  FrequencyValue out;
  out.nu = norm * gauss_kronrod<double, 61>::integrate([&](double s) { return kernel(s, false); }, lo,
                                                       hi, 15, 1e-13);
  out.dnu_da = norm * gauss_kronrod<double, 61>::integrate([&](double s) { return kernel(s, true); },
                                                           lo, hi, 15, 1e-13);
  return out;
}

}  // namespace

FrequencyValue collision_frequency_radial(const Mixture& mixture, const KernelFamily& family, int i,
                                          double a)
{
  if (i < 0 || i >= mixture.n() || family.n != mixture.n()) {
    throw std::invalid_argument("collision_frequency: species index or family size mismatch");
  }
  FrequencyValue out;
  for (int j = 0; j < mixture.n(); ++j) {
    const auto& phi = family.kinetic(i, j);
    const double c = angular_mass(family.angular(i, j));
    const FrequencyValue r = radial_average(phi.gamma, a);
    out.nu += mixture.rho(j) * c * phi.C * r.nu;
    out.dnu_da += mixture.rho(j) * c * phi.C * r.dnu_da;
  }
  return out;
}

double collision_frequency(const Mixture& mixture, const KernelFamily& family, int i, const Vec3& v)
{
  return collision_frequency_radial(mixture, family, i, norm(v)).nu;
}

double nu0_bound(const Mixture& mixture, const KernelFamily& family, double ell_b, double C1)
{
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mixture.n(); ++i) {
    double s = 0.0;
    for (int j = 0; j < mixture.n(); ++j) {
      const double g = family.kinetic(i, j).gamma;
      s += mixture.rho(j) * std::pow(2.0, 1.5 * g) * std::tgamma(0.5 * (g + 3.0));
    }
    best = std::min(best, C1 * ell_b * s / std::sqrt(pi));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exact collision quadrature
//
// With G = (v + v*)/2 and r = v - v* = rho omega the measure factorizes as
//   M(v) M(v*) dv dv* = [pi^{-3/2} e^{-|G|^2} dG] [(4 pi)^{-3/2} e^{-|r|^2/4} dr],
// and v, v*, v', v'* are polynomial in (G, rho, omega, sigma). Gauss rules in
// each factor with enough points integrate the polynomial parts exactly.

namespace {

struct PointRule
{
  std::vector<Vec3> points;
  std::vector<double> weights;
};

PointRule centre_rule(int q)
{
  const QuadratureRule h = hermite_rule_3d(q);
  PointRule out;
  const double scale = 1.0 / std::sqrt(2.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const Vec3 x = h.point(k);
    out.points.push_back({x[0] * scale, x[1] * scale, x[2] * scale});
    out.weights.push_back(h.weights[k]);
  }
  return out;
}

PointRule sphere_points(int m)
{
  const QuadratureRule s = sphere_product_rule(m);
  PointRule out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    out.points.push_back(s.point(k));
    out.weights.push_back(s.weights[k]);
  }
  return out;
}

struct RadialNodes
{
  std::vector<double> r;
  std::vector<double> w;
};

/// Gauss rule for rho^{gamma+2} e^{-rho^2/4} (4 pi)^{-3/2} on [0, inf).
RadialNodes relative_radial(int m, double gamma)
{
  const double p = gamma + 2.0;
  const QuadratureRule rule = radial_rule(m, p);
  const double factor = std::pow(2.0, 0.5 * (p + 1.0)) * std::pow(4.0 * pi, -1.5);
  RadialNodes out;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    out.r.push_back(std::sqrt(2.0) * rule.nodes[k]);
    out.w.push_back(factor * rule.weights[k]);
  }
  return out;
}

struct Moments
{
  Matrix PP;
  Matrix PQ;
  Matrix QQ;
};

Vec3 shifted(const Vec3& g, double h, const Vec3& dir)
{
  return {g[0] + h * dir[0], g[1] + h * dir[1], g[2] + h * dir[2]};
}

/// S_XY = int Phi/C b (X X^T ...) over the collision measure, with
/// P = H(v') - H(v), Q = H(v'*) - H(v*).
Moments collision_moments(const HermiteBasis& single, const PointRule& centre,
                          const RadialNodes& radial, const PointRule& sphere,
                          const AngularPolynomial& b, int threads)
{
  const auto d = static_cast<Eigen::Index>(single.per_species());
  const std::size_t ns = sphere.points.size();
  const std::size_t cols = radial.r.size() * ns * ns;
  std::vector<double> btab(ns * ns);
  for (std::size_t a = 0; a < ns; ++a) {
    for (std::size_t c = 0; c < ns; ++c) {
      btab[a * ns + c] = b(std::clamp(dot(sphere.points[a], sphere.points[c]), -1.0, 1.0));
    }
  }
  std::vector<Moments> parts(centre.points.size());
  parallel_for(centre.points.size(), threads, [&](std::size_t g) {
    const Vec3& G = centre.points[g];
    Matrix P(d, static_cast<Eigen::Index>(cols));
    Matrix Q(d, static_cast<Eigen::Index>(cols));
    Vector wt(static_cast<Eigen::Index>(cols));
    Vector hv(d), hs(d), hp(d), hq(d);
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < radial.r.size(); ++k) {
      const double h = 0.5 * radial.r[k];
      for (std::size_t a = 0; a < ns; ++a) {
        const Vec3& om = sphere.points[a];
        single.evaluate(shifted(G, h, om), {hv.data(), static_cast<std::size_t>(d)});
        single.evaluate(shifted(G, -h, om), {hs.data(), static_cast<std::size_t>(d)});
        for (std::size_t c = 0; c < ns; ++c) {
          const Vec3& sg = sphere.points[c];
          single.evaluate(shifted(G, h, sg), {hp.data(), static_cast<std::size_t>(d)});
          single.evaluate(shifted(G, -h, sg), {hq.data(), static_cast<std::size_t>(d)});
          P.col(col) = hp - hv;
          Q.col(col) = hq - hs;
          wt(col) = centre.weights[g] * radial.w[k] * sphere.weights[a] * sphere.weights[c] *
                    btab[a * ns + c];
          ++col;
        }
      }
    }
    const Matrix Pw = P * wt.asDiagonal();
    const Matrix Qw = Q * wt.asDiagonal();
    Moments& out = parts[g];
    out.PP = Pw * P.transpose();
    out.PQ = Pw * Q.transpose();
    out.QQ = Qw * Q.transpose();
    out.PP = 0.5 * (out.PP + out.PP.transpose()).eval();
    out.QQ = 0.5 * (out.QQ + out.QQ.transpose()).eval();
  });
  std::vector<Matrix> pp, pq, qq;
  for (auto& p : parts) {
    pp.push_back(std::move(p.PP));
    pq.push_back(std::move(p.PQ));
    qq.push_back(std::move(p.QQ));
  }
  return {pairwise_sum(pp), pairwise_sum(pq), pairwise_sum(qq)};
}

/// Z[a][b] = int |r|^gamma M(v) M(v*) H_a(v) H_b(v) dv dv*.
Matrix frequency_moment(const HermiteBasis& single, const PointRule& centre,
                        const RadialNodes& radial, const PointRule& sphere, int threads)
{
  const auto d = static_cast<Eigen::Index>(single.per_species());
  const std::size_t cols = radial.r.size() * sphere.points.size();
  std::vector<Matrix> parts(centre.points.size());
  parallel_for(centre.points.size(), threads, [&](std::size_t g) {
    Matrix H(d, static_cast<Eigen::Index>(cols));
    Vector wt(static_cast<Eigen::Index>(cols));
    Vector hv(d);
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < radial.r.size(); ++k) {
      for (std::size_t a = 0; a < sphere.points.size(); ++a) {
        single.evaluate(shifted(centre.points[g], 0.5 * radial.r[k], sphere.points[a]),
                        {hv.data(), static_cast<std::size_t>(d)});
        H.col(col) = hv;
        wt(col) = centre.weights[g] * radial.w[k] * sphere.weights[a];
        ++col;
      }
    }
    Matrix z = (H * wt.asDiagonal()) * H.transpose();
    parts[g] = 0.5 * (z + z.transpose());
  });
  return pairwise_sum(parts);
}

struct ClassKey
{
  double gamma;
  std::vector<double> coeffs;
  bool operator<(const ClassKey& o) const
  {
    return std::tie(gamma, coeffs) < std::tie(o.gamma, o.coeffs);
  }
};

int required_sphere_m(const KernelFamily& family, const Discretization& disc)
{
  int deg_b = 0;
  for (const auto& b : family.b) {
    deg_b = std::max(deg_b, b.degree());
  }
  const int need = (2 * disc.N + deg_b + 2) / 2;  // 2m - 1 >= 2N + deg b
  const int level = disc.sphere_level == SphereLevel::coarse   ? 6
                    : disc.sphere_level == SphereLevel::medium ? 12
                                                               : 24;
  return std::max(need, level);
}

void check_inputs(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                  const Discretization& disc)
{
  family.validate();
  if (family.n != mixture.n() || basis.species() != mixture.n()) {
    throw std::invalid_argument("assembly: mixture, kernel family and basis disagree on n");
  }
  if (basis.degree() != disc.N) {
    throw std::invalid_argument("assembly: basis degree differs from the discretization");
  }
  if (disc.N < 2) {
    throw std::invalid_argument("assembly: Hermite degree N must be >= 2");
  }
  if (disc.N + 1 > 12) {
    throw std::invalid_argument("assembly: Hermite degree N must be <= 11");
  }
  const CollisionRuleInfo info = collision_rule_info(family, disc);
  const std::size_t total = info.nodes * static_cast<std::size_t>(info.kernel_classes);
  if (total > disc.max_collision_nodes) {
    std::ostringstream msg;
    msg << "assembly: collision quadrature needs " << total << " nodes, above the configured cap of "
        << disc.max_collision_nodes;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

CollisionRuleInfo collision_rule_info(const KernelFamily& family, const Discretization& disc)
{
  CollisionRuleInfo info;
  info.centre_points = disc.N + 1;
  info.radial_points = disc.N + 1;
  info.sphere_m = required_sphere_m(family, disc);
  const auto ns = static_cast<std::size_t>(2 * info.sphere_m * info.sphere_m);
  const auto c = static_cast<std::size_t>(info.centre_points);
  info.nodes = c * c * c * static_cast<std::size_t>(info.radial_points) * ns * ns;
  std::map<ClassKey, int> classes;
  for (std::size_t k = 0; k < family.phi.size(); ++k) {
    classes[{family.phi[k].gamma, family.b[k].coeffs}] = 1;
  }
  info.kernel_classes = static_cast<int>(classes.size());
  return info;
}

LmLb assemble_Lm_Lb(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                    const Discretization& disc, int threads)
{
  check_inputs(mixture, family, basis, disc);
  const int n = mixture.n();
  const HermiteBasis single(1, disc.N);
  const auto d = static_cast<Eigen::Index>(single.per_species());
  const PointRule centre = centre_rule(disc.N + 1);
  const PointRule sphere = sphere_points(required_sphere_m(family, disc));

  std::map<ClassKey, Moments> cache;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ClassKey key{family.kinetic(i, j).gamma, family.angular(i, j).coeffs};
      if (cache.count(key) == 0) {
        const RadialNodes radial = relative_radial(disc.N + 1, key.gamma);
        cache[key] = collision_moments(single, centre, radial, sphere, family.angular(i, j), threads);
      }
    }
  }

  const auto total = static_cast<Eigen::Index>(basis.total_size());
  Matrix neg_m = Matrix::Zero(total, total);
  Matrix neg_b = Matrix::Zero(total, total);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Moments& s = cache.at({family.kinetic(i, j).gamma, family.angular(i, j).coeffs});
      const double ri = mixture.rho(i);
      const double rj = mixture.rho(j);
      const double factor = 0.25 * ri * rj * family.kinetic(i, j).C;
      const Eigen::Index oi = i * d;
      const Eigen::Index oj = j * d;
      if (i == j) {
        neg_m.block(oi, oi, d, d) += (factor / ri) * (s.PP + s.PQ + s.PQ.transpose() + s.QQ);
      }
      else {
        neg_b.block(oi, oi, d, d) += (factor / ri) * s.PP;
        neg_b.block(oj, oj, d, d) += (factor / rj) * s.QQ;
        neg_b.block(oi, oj, d, d) += (factor / std::sqrt(ri * rj)) * s.PQ;
        neg_b.block(oj, oi, d, d) += (factor / std::sqrt(ri * rj)) * s.PQ.transpose();
      }
    }
  }
  LmLb out;
  out.Lm = -0.5 * (neg_m + neg_m.transpose());
  out.Lb = -0.5 * (neg_b + neg_b.transpose());
  return out;
}

Matrix assemble_L(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                  const Discretization& disc, int threads)
{
  const LmLb parts = assemble_Lm_Lb(mixture, family, basis, disc, threads);
  return parts.Lm + parts.Lb;
}

namespace {

Matrix assemble_Lambda(const Mixture& mixture, const KernelFamily& family, const HermiteBasis& basis,
                       const Discretization& disc, int threads)
{
  check_inputs(mixture, family, basis, disc);
  const int n = mixture.n();
  const HermiteBasis single(1, disc.N);
  const auto d = static_cast<Eigen::Index>(single.per_species());
  const PointRule centre = centre_rule(disc.N + 1);
  const PointRule sphere = sphere_points(std::max(disc.N + 1, 2));
  std::map<double, Matrix> cache;
  const auto total = static_cast<Eigen::Index>(basis.total_size());
  Matrix lambda = Matrix::Zero(total, total);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& phi = family.kinetic(i, j);
      if (cache.count(phi.gamma) == 0) {
        cache[phi.gamma] =
            frequency_moment(single, centre, relative_radial(disc.N + 1, phi.gamma), sphere, threads);
      }
      const double c = angular_mass(family.angular(i, j));
      lambda.block(i * d, i * d, d, d) += mixture.rho(j) * c * phi.C * cache.at(phi.gamma);
    }
  }
  return lambda;
}

}  // namespace

LambdaK assemble_Lambda_K(const Mixture& mixture, const KernelFamily& family,
                          const HermiteBasis& basis, const Discretization& disc, int threads)
{
  LambdaK out;
  out.Lambda = assemble_Lambda(mixture, family, basis, disc, threads);
  out.K = assemble_L(mixture, family, basis, disc, threads) + out.Lambda;
  return out;
}

// ---------------------------------------------------------------------------
// Transport and velocity gradients

namespace {

void check_axis(int axis)
{
  if (axis < 0 || axis > 2) {
    throw std::invalid_argument("axis must be 0, 1 or 2");
  }
}

MultiIndex step(const MultiIndex& a, int axis, int delta)
{
  MultiIndex out = a;
  out[static_cast<std::size_t>(axis)] += delta;
  return out;
}

}  // namespace

Matrix assemble_transport(const HermiteBasis& basis, int axis)
{
  check_axis(axis);
  const auto total = static_cast<Eigen::Index>(basis.total_size());
  Matrix t = Matrix::Zero(total, total);
  const auto& idx = basis.indices();
  for (int i = 0; i < basis.species(); ++i) {
    for (std::size_t l = 0; l < idx.size(); ++l) {
      const int k = idx[l][static_cast<std::size_t>(axis)];
      const auto col = static_cast<Eigen::Index>(basis.index(i, l));
      const int up = basis.position(step(idx[l], axis, 1));
      if (up >= 0) {
        t(static_cast<Eigen::Index>(basis.index(i, static_cast<std::size_t>(up))), col) = std::sqrt(k + 1.0);
      }
      if (k > 0) {
        const int down = basis.position(step(idx[l], axis, -1));
        t(static_cast<Eigen::Index>(basis.index(i, static_cast<std::size_t>(down))), col) = std::sqrt(double(k));
      }
    }
  }
  return t;
}

Matrix assemble_grad_v_full(const HermiteBasis& basis, int axis)
{
  check_axis(axis);
  const HermiteBasis up_basis(basis.species(), basis.degree() + 1);
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(up_basis.total_size()),
                          static_cast<Eigen::Index>(basis.total_size()));
  const auto& idx = basis.indices();
  // d/dv (M^{1/2} H_b) = M^{1/2} (sqrt(b) H_{b-1} - v/2 H_b)
  //                    = M^{1/2} (sqrt(b)/2 H_{b-1} - sqrt(b+1)/2 H_{b+1})
  for (int i = 0; i < basis.species(); ++i) {
    for (std::size_t l = 0; l < idx.size(); ++l) {
      const int k = idx[l][static_cast<std::size_t>(axis)];
      const auto col = static_cast<Eigen::Index>(basis.index(i, l));
      const int up = up_basis.position(step(idx[l], axis, 1));
      d(static_cast<Eigen::Index>(up_basis.index(i, static_cast<std::size_t>(up))), col) =
          -0.5 * std::sqrt(k + 1.0);
      if (k > 0) {
        const int down = up_basis.position(step(idx[l], axis, -1));
        d(static_cast<Eigen::Index>(up_basis.index(i, static_cast<std::size_t>(down))), col) =
            0.5 * std::sqrt(double(k));
      }
    }
  }
  return d;
}

Matrix assemble_grad_v(const HermiteBasis& basis, int axis, double* discarded)
{
  const Matrix full = assemble_grad_v_full(basis, axis);
  const HermiteBasis up_basis(basis.species(), basis.degree() + 1);
  const auto per = basis.per_species();
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(basis.total_size()),
                          static_cast<Eigen::Index>(basis.total_size()));
  double dropped = 0.0;
  for (int i = 0; i < basis.species(); ++i) {
    for (std::size_t l = 0; l < up_basis.per_species(); ++l) {
      const auto row = full.row(static_cast<Eigen::Index>(up_basis.index(i, l)));
      if (l < per) {
        d.row(static_cast<Eigen::Index>(basis.index(i, l))) = row;
      }
      else {
        dropped += row.squaredNorm();
      }
    }
  }
  if (discarded != nullptr) {
    *discarded = std::sqrt(dropped);
  }
  return d;
}

OperatorSet assemble_operators(const Mixture& mixture, const KernelFamily& family,
                               const Discretization& disc, int threads)
{
  OperatorSet ops;
  ops.basis = HermiteBasis(mixture.n(), disc.N);
  LmLb parts = assemble_Lm_Lb(mixture, family, ops.basis, disc, threads);
  ops.Lm = std::move(parts.Lm);
  ops.Lb = std::move(parts.Lb);
  ops.L = ops.Lm + ops.Lb;
  ops.Lambda = assemble_Lambda(mixture, family, ops.basis, disc, threads);
  ops.HGram = ops.Lambda;
  ops.K = ops.L + ops.Lambda;
  ops.vgram = Matrix::Zero(ops.L.rows(), ops.L.cols());
  for (int a = 0; a < 3; ++a) {
    const auto s = static_cast<std::size_t>(a);
    double dropped = 0.0;
    ops.transport[s] = assemble_transport(ops.basis, a);
    ops.grad_v[s] = assemble_grad_v(ops.basis, a, &dropped);
    ops.grad_v_full[s] = assemble_grad_v_full(ops.basis, a);
    ops.vgram += ops.grad_v_full[s].transpose() * ops.grad_v_full[s];
    ops.grad_truncation = std::max(ops.grad_truncation, dropped);
  }
  ops.rule = collision_rule_info(family, disc);
  std::ostringstream trunc;
  trunc << std::setprecision(17) << ops.grad_truncation;
  ops.meta = {
      {"N", std::to_string(disc.N)},
      {"species", std::to_string(mixture.n())},
      {"sphere_m", std::to_string(ops.rule.sphere_m)},
      {"centre_points", std::to_string(ops.rule.centre_points)},
      {"radial_points", std::to_string(ops.rule.radial_points)},
      {"collision_nodes_per_class", std::to_string(ops.rule.nodes)},
      {"kernel_classes", std::to_string(ops.rule.kernel_classes)},
      {"grad_truncation", trunc.str()},
  };
  return ops;
}

void write_operator_csv(const std::string& path, const std::string& role, const Matrix& m,
                        const std::map<std::string, std::string>& meta)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "# role=" << role << "; rows=" << m.rows() << "; cols=" << m.cols();
  for (const auto& [k, v] : meta) {
    out << "; " << k << "=" << v;
  }
  out << "\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << (c ? "," : "") << m(r, c);
    }
    out << "\n";
  }
}

}  // namespace kgap
