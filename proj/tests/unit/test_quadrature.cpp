#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kgap/quadrature.hpp"
#include "oracles.hpp"

using namespace kgap;

namespace {

constexpr double pi = std::numbers::pi;

/// Integral of x^a y^b z^c over the unit sphere.
double sphere_monomial(int a, int b, int c)
{
  if (a % 2 || b % 2 || c % 2) {
    return 0.0;
  }
  const double ba = (a + 1) / 2.0;
  const double bb = (b + 1) / 2.0;
  const double bc = (c + 1) / 2.0;
  return 2.0 * std::tgamma(ba) * std::tgamma(bb) * std::tgamma(bc) / std::tgamma(ba + bb + bc);
}

double rule_sum(const QuadratureRule& rule, auto f)
{
  double s = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    s += rule.weights[k] * f(rule.node(k));
  }
  return s;
}

}  // namespace

TEST_CASE("hermite 1-D rule: Gaussian moments up to degree 2q-1")
{
  for (int q : {1, 3, 5, 10, 20}) {
    const QuadratureRule rule = hermite_rule_1d(q);
    CHECK(rule.size() == static_cast<std::size_t>(q));
    CHECK(std::abs(rule.weight_sum() - 1.0) < 1e-14);
    for (int k = 0; 2 * k <= 2 * q - 1; ++k) {
      const double m = rule_sum(rule, [&](auto x) { return std::pow(x[0], 2 * k); });
      CHECK(std::abs(m - oracle::odd_double_factorial(k)) <= 1e-12 * oracle::odd_double_factorial(k));
      const double odd = rule_sum(rule, [&](auto x) { return std::pow(x[0], 2 * k + 1); });
      CHECK(std::abs(odd) < 1e-10 * std::max(1.0, oracle::odd_double_factorial(k + 1)));
    }
  }
  CHECK_THROWS(hermite_rule_1d(0));
  CHECK_THROWS(hermite_rule_1d(65));
}

TEST_CASE("hermite 3-D rule: tensor structure")
{
  const QuadratureRule rule = hermite_rule_3d(6);
  CHECK(rule.size() == 216);
  CHECK(std::abs(rule.weight_sum() - 1.0) < 1e-13);
  const double m = rule_sum(rule, [](auto x) { return x[0] * x[0] * x[1] * x[1] * x[2] * x[2] * x[2] * x[2]; });
  CHECK(std::abs(m - 3.0) < 1e-12);
}

TEST_CASE("legendre rule exactness")
{
  for (int m : {1, 4, 12, 24}) {
    const QuadratureRule rule = legendre_rule(m);
    for (int k = 0; k <= 2 * m - 1; ++k) {
      const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
      CHECK(std::abs(rule_sum(rule, [&](auto x) { return std::pow(x[0], k); }) - exact) < 1e-13);
    }
  }
}

TEST_CASE("radial rule: moments of r^p e^{-r^2/2}")
{
  for (double p : {2.0, 2.5, 3.0, 0.0}) {
    for (int m : {1, 3, 6, 12}) {
      const QuadratureRule rule = radial_rule(m, p);
      for (int k = 0; k <= 2 * m - 1; ++k) {
        const double s = p + k;
        const double exact = std::pow(2.0, (s - 1.0) / 2.0) * std::tgamma((s + 1.0) / 2.0);
        const double got = rule_sum(rule, [&](auto x) { return std::pow(x[0], k); });
        CHECK(std::abs(got - exact) <= 1e-11 * exact);
      }
    }
  }
  CHECK_THROWS(radial_rule(13, 2.0));
  CHECK_THROWS(radial_rule(3, -1.0));
}

TEST_CASE("sphere rules integrate spherical monomials")
{
  const QuadratureRule levels[] = {sphere_rule(SphereLevel::coarse), sphere_rule(SphereLevel::medium),
                                   sphere_rule(SphereLevel::fine), lebedev_110()};
  const int degrees[] = {11, 23, 47, 17};
  for (int r = 0; r < 4; ++r) {
    const QuadratureRule& rule = levels[r];
    CHECK(std::abs(rule.weight_sum() - 4.0 * pi) < 1e-12);
    const int top = std::min(degrees[r], 12);
    for (int a = 0; a <= top; ++a) {
      for (int b = 0; a + b <= top; ++b) {
        for (int c = 0; a + b + c <= top; ++c) {
          const double got = rule_sum(rule, [&](auto x) {
            return std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], c);
          });
          CHECK(std::abs(got - sphere_monomial(a, b, c)) < 1e-12);
        }
      }
    }
  }
  CHECK(lebedev_110().size() == 110);
  CHECK(parse_sphere_level("fine") == SphereLevel::fine);
  CHECK_THROWS(parse_sphere_level("ultra"));
}

TEST_CASE("collision geometry conserves momentum and energy")
{
  CollisionSampler sampler(11);
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const CollisionSample s = sampler.next();
    const CollisionPair c = post_collision(s.v, s.v_star, s.sigma);
    const double e0 = dot(s.v, s.v) + dot(s.v_star, s.v_star);
    const double e1 = dot(c.v_prime, c.v_prime) + dot(c.v_prime_star, c.v_prime_star);
    worst = std::max(worst, std::abs(e1 - e0) / e0);
    for (std::size_t a = 0; a < 3; ++a) {
      const double p0 = s.v[a] + s.v_star[a];
      const double p1 = c.v_prime[a] + c.v_prime_star[a];
      worst = std::max(worst, std::abs(p1 - p0) / std::sqrt(e0));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("collision geometry edge cases")
{
  const Vec3 v{1.0, 2.0, 3.0};
  const Vec3 sigma{0.0, 0.0, 1.0};
  const CollisionPair same = post_collision(v, v, sigma);
  CHECK(same.v_prime == v);
  CHECK(same.v_prime_star == v);
  CHECK(cos_theta(v, v, sigma) == 1.0);
  CHECK_THROWS_AS(post_collision(v, Vec3{0.0, 0.0, 0.0}, Vec3{0.0, 0.0, 2.0}), std::invalid_argument);
  // sigma along v - v*: elastic pass-through.
  const Vec3 w{1.0, 2.0, 1.0};
  const CollisionPair c = post_collision(v, w, sigma);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(std::abs(c.v_prime[a] - v[a]) < 1e-15);
  }
}

TEST_CASE("sampler determinism and Monte-Carlo summaries")
{
  CollisionSampler a(5);
  CollisionSampler b(5);
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next();
    const auto y = b.next();
    CHECK(x.v == y.v);
    CHECK(x.sigma == y.sigma);
    CHECK(std::abs(norm(x.sigma) - 1.0) < 1e-14);
  }
  CollisionSampler s0 = a.substream(0);
  CollisionSampler s1 = a.substream(1);
  CHECK(s0.next().v != s1.next().v);

  CollisionSampler c(9);
  const MonteCarloEstimate one = monte_carlo(c, 1000, [](const CollisionSample&) { return 1.0; });
  CHECK(one.mean == doctest::Approx(4.0 * pi));
  CHECK(one.std_err == doctest::Approx(0.0));
  CollisionSampler d(9);
  const MonteCarloEstimate e2 = monte_carlo(d, 200000, [](const CollisionSample& s) { return dot(s.v, s.v); });
  CHECK(std::abs(e2.mean - 12.0 * pi) < 5.0 * e2.std_err);
}
