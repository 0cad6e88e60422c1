#include "kgap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kgap/linalg.hpp"

namespace kgap {

double dot(const Vec3& a, const Vec3& b)
{
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm(const Vec3& a)
{
  return std::sqrt(dot(a, a));
}

CollisionPair post_collision(const Vec3& v, const Vec3& v_star, const Vec3& sigma)
{
  const double s = norm(sigma);
  if (!(std::abs(s - 1.0) <= 1e-12)) {
    std::ostringstream msg;
    msg << "post_collision: sigma must be a unit vector (|sigma| = " << s << ")";
    throw std::invalid_argument(msg.str());
  }
  CollisionPair out{v, v_star, v, v_star, sigma};
  const Vec3 rel{v[0] - v_star[0], v[1] - v_star[1], v[2] - v_star[2]};
  const double half = 0.5 * norm(rel);
  if (half == 0.0) {
    return out;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double center = 0.5 * (v[k] + v_star[k]);
    out.v_prime[k] = center + half * sigma[k];
    out.v_prime_star[k] = center - half * sigma[k];
  }
  return out;
}

double cos_theta(const Vec3& v, const Vec3& v_star, const Vec3& sigma)
{
  const Vec3 rel{v[0] - v_star[0], v[1] - v_star[1], v[2] - v_star[2]};
  const double r = norm(rel);
  if (r == 0.0) {
    return 1.0;
  }
  return std::clamp(dot(sigma, rel) / r, -1.0, 1.0);
}

Vec3 QuadratureRule::point(std::size_t k) const
{
  Vec3 p{0.0, 0.0, 0.0};
  const auto n = node(k);
  for (std::size_t d = 0; d < n.size() && d < 3; ++d) {
    p[d] = n[d];
  }
  return p;
}

double QuadratureRule::weight_sum() const
{
  return pairwise_sum(weights);
}

namespace {

/// Golub-Welsch on a symmetric tridiagonal Jacobi matrix; mu0 is the total mass.
QuadratureRule gauss_from_recurrence(const std::vector<double>& diag, const std::vector<double>& off,
                                     double mu0, RuleKind kind)
{
  const auto m = static_cast<Eigen::Index>(diag.size());
  Matrix j = Matrix::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    j(k, k) = diag[static_cast<std::size_t>(k)];
    if (k + 1 < m) {
      j(k, k + 1) = j(k + 1, k) = off[static_cast<std::size_t>(k)];
    }
  }
  const EigenSystem sys = jacobi_eigen(j, 1e-12);
  QuadratureRule rule;
  rule.kind = kind;
  rule.dim = 1;
  rule.exactness = 2 * static_cast<int>(m) - 1;
  for (Eigen::Index k = 0; k < m; ++k) {
    rule.nodes.push_back(sys.values(k));
    const double v0 = sys.vectors(0, k);
    rule.weights.push_back(mu0 * v0 * v0);
  }
  return rule;
}

/// Enforce exact reflection symmetry x -> -x of a rule on a symmetric weight.
void symmetrize(QuadratureRule& rule)
{
  const std::size_t m = rule.size();
  for (std::size_t k = 0; k < m / 2; ++k) {
    const std::size_t r = m - 1 - k;
    const double x = 0.5 * (rule.nodes[r] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[r] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[r] = x;
    rule.weights[k] = rule.weights[r] = w;
  }
  if (m % 2 == 1) {
    rule.nodes[m / 2] = 0.0;
  }
}

}  // namespace

QuadratureRule hermite_rule_1d(int q)
{
  if (q < 1 || q > 64) {
    throw std::invalid_argument("hermite_rule_1d: q must lie in [1, 64]");
  }
  std::vector<double> diag(static_cast<std::size_t>(q), 0.0);
  std::vector<double> off;
  for (int k = 1; k < q; ++k) {
    off.push_back(std::sqrt(static_cast<double>(k)));
  }
  QuadratureRule rule = gauss_from_recurrence(diag, off, 1.0, RuleKind::hermite_1d);
  // Newton polish on the orthonormal recurrence, then Christoffel weights
  // 1 / sum_j p_j(x)^2: the tiny outer weights keep full relative precision.
  for (std::size_t k = 0; k < rule.size(); ++k) {
    double x = rule.nodes[k];
    double christoffel = 1.0;
    for (int it = 0; it < 3; ++it) {
      double p0 = 0.0;
      double p1 = 1.0;
      christoffel = 0.0;
      for (int j = 0; j < q; ++j) {
        christoffel += p1 * p1;
        const double p2 = (x * p1 - std::sqrt(static_cast<double>(j)) * p0) / std::sqrt(j + 1.0);
        p0 = p1;
        p1 = p2;
      }
      // p1 = p_q, p0 = p_{q-1}, p_q' = sqrt(q) p_{q-1}
      x -= p1 / (std::sqrt(static_cast<double>(q)) * p0);
    }
    rule.nodes[k] = x;
    rule.weights[k] = 1.0 / christoffel;
  }
  symmetrize(rule);
  const double total = rule.weight_sum();
  for (double& w : rule.weights) {
    w /= total;
  }
  return rule;
}

QuadratureRule hermite_rule_3d(int q)
{
  const QuadratureRule line = hermite_rule_1d(q);
  QuadratureRule rule;
  rule.kind = RuleKind::hermite_3d_tensor;
  rule.dim = 3;
  rule.exactness = line.exactness;
  for (std::size_t a = 0; a < line.size(); ++a) {
    for (std::size_t b = 0; b < line.size(); ++b) {
      for (std::size_t c = 0; c < line.size(); ++c) {
        rule.nodes.insert(rule.nodes.end(), {line.nodes[a], line.nodes[b], line.nodes[c]});
        rule.weights.push_back(line.weights[a] * line.weights[b] * line.weights[c]);
      }
    }
  }
  return rule;
}

QuadratureRule legendre_rule(int m)
{
  if (m < 1 || m > 128) {
    throw std::invalid_argument("legendre_rule: m must lie in [1, 128]");
  }
  std::vector<double> diag(static_cast<std::size_t>(m), 0.0);
  std::vector<double> off;
  for (int k = 1; k < m; ++k) {
    const double kk = k;
    off.push_back(kk / std::sqrt(4.0 * kk * kk - 1.0));
  }
  QuadratureRule rule = gauss_from_recurrence(diag, off, 2.0, RuleKind::legendre_1d);
  symmetrize(rule);
  return rule;
}

QuadratureRule radial_rule(int m, double p)
{
  if (m < 1 || m > 12) {
    throw std::invalid_argument("radial_rule: m must lie in [1, 12]");
  }
  if (!(p > -1.0)) {
    throw std::invalid_argument("radial_rule: exponent must exceed -1");
  }
  // Moments mu_k = int_0^inf r^{k+p} e^{-r^2/2} dr = 2^{(k+p-1)/2} Gamma((k+p+1)/2),
  // normalized by mu_0 to keep the Hankel matrix well scaled.
  const int size = m + 1;
  std::vector<long double> mu(static_cast<std::size_t>(2 * m + 1));
  const long double log_mu0 =
      0.5L * (p - 1.0L) * std::log(2.0L) + std::lgamma(0.5L * (p + 1.0L));
  for (int k = 0; k <= 2 * m; ++k) {
    const long double e = k + p;
    const long double log_mu = 0.5L * (e - 1.0L) * std::log(2.0L) + std::lgamma(0.5L * (e + 1.0L));
    mu[static_cast<std::size_t>(k)] = std::exp(log_mu - log_mu0);
  }
  // Upper Cholesky factor of the Hankel matrix H_ij = mu_{i+j}.
  std::vector<long double> r(static_cast<std::size_t>(size * size), 0.0L);
  auto at = [&](int i, int j) -> long double& { return r[static_cast<std::size_t>(i * size + j)]; };
  for (int i = 0; i < size; ++i) {
    long double s = mu[static_cast<std::size_t>(2 * i)];
    for (int k = 0; k < i; ++k) {
      s -= at(k, i) * at(k, i);
    }
    if (s <= 0.0L) {
      throw NumericalError("radial_rule: moment matrix lost definiteness");
    }
    at(i, i) = std::sqrt(s);
    for (int j = i + 1; j < size; ++j) {
      long double t = mu[static_cast<std::size_t>(i + j)];
      for (int k = 0; k < i; ++k) {
        t -= at(k, i) * at(k, j);
      }
      at(i, j) = t / at(i, i);
    }
  }
  std::vector<double> diag;
  std::vector<double> off;
  for (int j = 0; j < m; ++j) {
    long double a = at(j, j + 1) / at(j, j);
    if (j > 0) {
      a -= at(j - 1, j) / at(j - 1, j - 1);
    }
    diag.push_back(static_cast<double>(a));
    if (j + 1 < m) {
      off.push_back(static_cast<double>(at(j + 1, j + 1) / at(j, j)));
    }
  }
  QuadratureRule rule = gauss_from_recurrence(diag, off, static_cast<double>(std::exp(log_mu0)),
                                              RuleKind::radial);
  return rule;
}

SphereLevel parse_sphere_level(const std::string& name)
{
  if (name == "coarse") {
    return SphereLevel::coarse;
  }
  if (name == "medium") {
    return SphereLevel::medium;
  }
  if (name == "fine") {
    return SphereLevel::fine;
  }
  throw std::invalid_argument("unknown sphere level '" + name + "' (expected coarse, medium or fine)");
}

std::string to_string(SphereLevel level)
{
  switch (level) {
    case SphereLevel::coarse:
      return "coarse";
    case SphereLevel::medium:
      return "medium";
    case SphereLevel::fine:
      return "fine";
  }
  return "coarse";
}

QuadratureRule sphere_product_rule(int m)
{
  const QuadratureRule z = legendre_rule(m);
  const int azimuth = 2 * m;
  const double dphi = 2.0 * std::numbers::pi / azimuth;
  QuadratureRule rule;
  rule.kind = RuleKind::sphere;
  rule.dim = 3;
  rule.exactness = 2 * m - 1;
  for (std::size_t a = 0; a < z.size(); ++a) {
    const double ct = z.nodes[a];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int k = 0; k < azimuth; ++k) {
      const double phi = (k + 0.5) * dphi;
      rule.nodes.insert(rule.nodes.end(), {st * std::cos(phi), st * std::sin(phi), ct});
      rule.weights.push_back(z.weights[a] * dphi);
    }
  }
  return rule;
}

QuadratureRule sphere_rule(SphereLevel level)
{
  switch (level) {
    case SphereLevel::coarse:
      return sphere_product_rule(6);
    case SphereLevel::medium:
      return sphere_product_rule(12);
    case SphereLevel::fine:
      return sphere_product_rule(24);
  }
  return sphere_product_rule(6);
}

namespace {

void add_orbit(QuadratureRule& rule, const std::vector<Vec3>& points, double w)
{
  for (const auto& p : points) {
    rule.nodes.insert(rule.nodes.end(), {p[0], p[1], p[2]});
    rule.weights.push_back(4.0 * std::numbers::pi * w);
  }
}

// Octahedral orbits of the Lebedev construction.
std::vector<Vec3> orbit_axes()
{
  return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
}

std::vector<Vec3> orbit_corners()
{
  const double a = 1.0 / std::sqrt(3.0);
  std::vector<Vec3> out;
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      for (int s3 : {-1, 1}) {
        out.push_back({s1 * a, s2 * a, s3 * a});
      }
    }
  }
  return out;
}

std::vector<Vec3> orbit_aab(double a)
{
  const double b = std::sqrt(1.0 - 2.0 * a * a);
  std::vector<Vec3> out;
  for (int dir = 0; dir < 3; ++dir) {
    for (int s3 : {-1, 1}) {
      for (int s2 : {-1, 1}) {
        for (int s1 : {-1, 1}) {
          Vec3 p{};
          p[static_cast<std::size_t>(dir)] = b * s3;
          p[static_cast<std::size_t>((dir + 1) % 3)] = a * s1;
          p[static_cast<std::size_t>((dir + 2) % 3)] = a * s2;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

std::vector<Vec3> orbit_ab0(double a)
{
  const double b = std::sqrt(1.0 - a * a);
  std::vector<Vec3> out;
  for (int swap = 0; swap < 2; ++swap) {
    const double x = swap == 0 ? a : b;
    const double y = swap == 0 ? b : a;
    for (int dir = 0; dir < 3; ++dir) {
      for (int s2 : {-1, 1}) {
        for (int s1 : {-1, 1}) {
          Vec3 p{};
          p[static_cast<std::size_t>((dir + 1) % 3)] = x * s1;
          p[static_cast<std::size_t>((dir + 2) % 3)] = y * s2;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

}  // namespace

QuadratureRule lebedev_110()
{
  QuadratureRule rule;
  rule.kind = RuleKind::sphere;
  rule.dim = 3;
  rule.exactness = 17;
  add_orbit(rule, orbit_axes(), 0.003828270494937162);
  add_orbit(rule, orbit_corners(), 0.009793737512487512);
  add_orbit(rule, orbit_aab(0.1851156353447362), 0.008211737283191111);
  add_orbit(rule, orbit_aab(0.6904210483822922), 0.009942814891178103);
  add_orbit(rule, orbit_aab(0.3956894730559419), 0.009595471336070963);
  add_orbit(rule, orbit_ab0(0.4783690288121502), 0.009694996361663028);
  return rule;
}

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CollisionSampler::CollisionSampler(std::uint64_t seed)
    : seed_(seed)
    , engine_(splitmix64(seed))
{
}

CollisionSample CollisionSampler::next()
{
  CollisionSample s{};
  for (auto& x : s.v) {
    x = normal_(engine_);
  }
  for (auto& x : s.v_star) {
    x = normal_(engine_);
  }
  double len = 0.0;
  do {
    for (auto& x : s.sigma) {
      x = normal_(engine_);
    }
    len = norm(s.sigma);
  } while (len < 1e-12);
  for (auto& x : s.sigma) {
    x /= len;
  }
  s.weight = 4.0 * std::numbers::pi;
  return s;
}

CollisionSampler CollisionSampler::substream(std::uint64_t index) const
{
  return CollisionSampler(splitmix64(seed_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

MonteCarloEstimate monte_carlo(CollisionSampler& sampler, std::size_t count,
                               const std::function<double(const CollisionSample&)>& g)
{
  if (count < 1) {
    throw std::invalid_argument("monte_carlo: count must be >= 1");
  }
  std::vector<double> values(count);
  for (auto& y : values) {
    const CollisionSample s = sampler.next();
    y = s.weight * g(s);
  }
  MonteCarloEstimate est;
  est.count = count;
  est.mean = pairwise_sum(values) / static_cast<double>(count);
  std::vector<double> sq(count);
  for (std::size_t k = 0; k < count; ++k) {
    sq[k] = (values[k] - est.mean) * (values[k] - est.mean);
  }
  const double var = count > 1 ? pairwise_sum(sq) / static_cast<double>(count - 1) : 0.0;
  est.std_err = std::sqrt(var / static_cast<double>(count));
  return est;
}

}  // namespace kgap
