#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kgap/hermite_basis.hpp"

namespace kgap {

// ---------------------------------------------------------------------------
// Collision geometry

/// Post-collisional (v, v*) with the matching pre-collisional pair.
struct CollisionPair
{
  Vec3 v;
  Vec3 v_star;
  Vec3 v_prime;
  Vec3 v_prime_star;
  Vec3 sigma;
};

/**
 * v' = (v+v*)/2 + |v-v*|/2 sigma,  v'* = (v+v*)/2 - |v-v*|/2 sigma.
 * Throws std::invalid_argument unless | |sigma| - 1 | <= 1e-12.
 * For v = v* both outputs equal v.
 */
CollisionPair post_collision(const Vec3& v, const Vec3& v_star, const Vec3& sigma);

/// sigma . (v - v*) / |v - v*| clamped to [-1, 1]; 1 for grazing v = v*.
double cos_theta(const Vec3& v, const Vec3& v_star, const Vec3& sigma);

double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

// ---------------------------------------------------------------------------
// Deterministic rules

enum class RuleKind
{
  hermite_1d,
  hermite_3d_tensor,
  radial,
  legendre_1d,
  sphere,
  product_collision,
};

struct QuadratureRule
{
  RuleKind kind = RuleKind::hermite_1d;
  int dim = 1;
  std::vector<double> nodes;  // size() * dim, node-major
  std::vector<double> weights;
  int exactness = 0;          // polynomial degree integrated exactly

  std::size_t size() const { return weights.size(); }
  std::span<const double> node(std::size_t k) const
  {
    return {nodes.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  Vec3 point(std::size_t k) const;
  double weight_sum() const;
};

/// q-point Gauss rule for the standard normal density (2 pi)^{-1/2} e^{-x^2/2},
/// weights summing to 1, exact up to degree 2q-1. 1 <= q <= 64.
QuadratureRule hermite_rule_1d(int q);

/// Tensor product of hermite_rule_1d(q) in three dimensions.
QuadratureRule hermite_rule_3d(int q);

/// m-point Gauss-Legendre rule on [-1, 1].
QuadratureRule legendre_rule(int m);

/// m-point Gauss rule on [0, inf) for the weight r^p e^{-r^2/2}, built from
/// its moments by Golub-Welsch. Weights sum to the zeroth moment. 1 <= m <= 12.
QuadratureRule radial_rule(int m, double p);

enum class SphereLevel
{
  coarse,  // 6 x 12
  medium,  // 12 x 24
  fine,    // 24 x 48
};

SphereLevel parse_sphere_level(const std::string& name);
std::string to_string(SphereLevel level);

/// Gauss-Legendre(cos theta) x uniform(phi) rule with m x 2m nodes, exact for
/// spherical polynomials of degree <= 2m - 1. Weights sum to 4 pi.
QuadratureRule sphere_product_rule(int m);
QuadratureRule sphere_rule(SphereLevel level);

/// Lebedev-Laikov 110-point rule (degree 17), weights summing to 4 pi.
QuadratureRule lebedev_110();

// ---------------------------------------------------------------------------
// Monte-Carlo sampling over R^3 x R^3 x S^2

struct CollisionSample
{
  Vec3 v;
  Vec3 v_star;
  Vec3 sigma;
  double weight;  // 4 pi: sigma is drawn with density 1 / (4 pi)
};

/**
 * v, v* ~ N(0, I_3) independently, sigma uniform on S^2. The sample mean of
 * weight * g estimates the integral of g M_1 M_1^* / rho_1^2 dv dv* dsigma.
 * Streams are fully determined by the seed; substream(k) derives an
 * independent sampler so parallel consumers stay reproducible.
 */
class CollisionSampler
{
 public:
  explicit CollisionSampler(std::uint64_t seed);

  CollisionSample next();
  CollisionSampler substream(std::uint64_t index) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct MonteCarloEstimate
{
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of weight * g over `count` draws.
MonteCarloEstimate monte_carlo(CollisionSampler& sampler, std::size_t count,
                               const std::function<double(const CollisionSample&)>& g);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace kgap
