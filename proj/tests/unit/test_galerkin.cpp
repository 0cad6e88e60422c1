#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "fixtures.hpp"
#include "kgap/galerkin.hpp"
#include "kgap/spectra.hpp"
#include "oracles.hpp"

using namespace kgap;

TEST_CASE("collision frequency: hard spheres closed form")
{
  const Mixture m({1.0, 0.5});
  const KernelFamily f = uniform_family(2, PowerLaw{1.0, 1.0}, fixture::isotropic());
  for (double a : {0.0, 1e-3, 0.3, 1.0, 2.5, 6.0, 12.0}) {
    const FrequencyValue v = collision_frequency_radial(m, f, 0, a);
    CHECK(std::abs(v.nu - 1.5 * oracle::mean_distance_closed(a)) < 1e-10 * (1.0 + v.nu));
  }
  CHECK(collision_frequency(m, f, 1, Vec3{1.0, 2.0, 2.0}) ==
        doctest::Approx(1.5 * oracle::mean_distance_closed(3.0)).epsilon(1e-12));
}

TEST_CASE("collision frequency: fractional exponent and derivative")
{
  const Mixture m({1.0});
  const KernelFamily f = uniform_family(1, PowerLaw{2.0, 0.5}, fixture::isotropic());
  for (double a : {0.0, 0.5, 1.7, 4.0, 9.0}) {
    const FrequencyValue v = collision_frequency_radial(m, f, 0, a);
    CHECK(std::abs(v.nu - 2.0 * oracle::mean_power_distance(a, 0.5)) < 1e-9);
    if (a > 0.0) {
      const double h = 1e-5;
      const double fd = (collision_frequency_radial(m, f, 0, a + h).nu - collision_frequency_radial(m, f, 0, a - h).nu) / (2 * h);
      CHECK(std::abs(v.dnu_da - fd) < 1e-6);
    }
  }
  // Maxwell molecules: constant frequency rho * mass * C.
  const KernelFamily mm = uniform_family(1, PowerLaw{3.0, 0.0}, fixture::isotropic());
  CHECK(collision_frequency_radial(m, mm, 0, 2.0).nu == doctest::Approx(3.0));
  CHECK(collision_frequency_radial(m, mm, 0, 2.0).dnu_da == doctest::Approx(0.0));
}

TEST_CASE("nu0 bound never exceeds the frequency")
{
  const Mixture m({1.0, 0.5});
  for (double gamma : {0.0, 0.5, 1.0}) {
    const KernelFamily f = uniform_family(2, PowerLaw{1.0, gamma}, fixture::isotropic());
    const double nu0 = nu0_bound(m, f, compute_ell_b(f), 1.0);
    for (int i = 0; i < 2; ++i) {
      for (double a = 0.0; a < 8.0; a += 0.25) {
        CHECK(collision_frequency_radial(m, f, i, a).nu >= nu0);
      }
    }
  }
}

TEST_CASE("transport and velocity-gradient structure")
{
  const HermiteBasis b(2, 5);
  const std::size_t P = b.per_species();
  for (int axis = 0; axis < 3; ++axis) {
    const Matrix T = assemble_transport(b, axis);
    CHECK(symmetry_defect(T) == 0.0);
    double discarded = -1.0;
    const Matrix D = assemble_grad_v(b, axis, &discarded);
    CHECK(max_abs(D + D.transpose()) < 1e-14);
    CHECK(discarded > 0.0);
    const Matrix Dfull = assemble_grad_v_full(b, axis);
    const HermiteBasis up(2, 6);
    CHECK(Dfull.rows() == static_cast<Eigen::Index>(up.total_size()));
    // Degree-<= N rows of the full derivative are the truncated operator.
    for (int i = 0; i < 2; ++i) {
      for (std::size_t a = 0; a < P; ++a) {
        const auto row_full = static_cast<Eigen::Index>(up.index(i, a));
        const auto row = static_cast<Eigen::Index>(b.index(i, a));
        CHECK((Dfull.row(row_full) - D.row(row)).cwiseAbs().maxCoeff() < 1e-14);
      }
    }

    // [d/dv, v] = 1 on coefficients of degree <= N - 2.
    const std::size_t low = simplex_size(3);
    std::mt19937_64 rng(static_cast<std::uint64_t>(axis));
    std::normal_distribution<double> g(0.0, 1.0);
    Vector f = Vector::Zero(static_cast<Eigen::Index>(b.total_size()));
    for (int i = 0; i < 2; ++i) {
      for (std::size_t a = 0; a < low; ++a) {
        f(static_cast<Eigen::Index>(b.index(i, a))) = g(rng);
      }
    }
    CHECK((D * (T * f) - T * (D * f) - f).norm() < 1e-12);
  }
}

TEST_CASE("velocity gradient of an embedded Maxwellian")
{
  const Mixture m({1.0, 0.5});
  const HermiteBasis b(2, 3);
  for (int axis = 0; axis < 3; ++axis) {
    const Matrix D = assemble_grad_v(b, axis);
    for (int i = 0; i < 2; ++i) {
      // d/dv M^{1/2} = -(v / 2) M^{1/2}
      const Vector expect = -0.5 * embed_velocity(m, b, i, axis);
      CHECK((D * embed_one(m, b, i) - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("velocity gradient matches a pointwise derivative")
{
  // f = M^{1/2} p with p = v1 v2^2: grad_1 f = M^{1/2} (v2^2 - v1^2 v2^2 / 2).
  const HermiteBasis b(1, 4);
  const Matrix D = assemble_grad_v_full(b, 0);
  const HermiteBasis up(1, 5);
  Vector f = Vector::Zero(static_cast<Eigen::Index>(b.total_size()));
  // v1 v2^2 = H_{1,0,0} + sqrt(2) H_{1,2,0}
  f(b.position({1, 0, 0})) = 1.0;
  f(b.position({1, 2, 0})) = std::sqrt(2.0);
  const Vector df = D * f;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 v{g(rng), g(rng), g(rng)};
    double s = 0.0;
    for (std::size_t a = 0; a < up.per_species(); ++a) {
      s += df(static_cast<Eigen::Index>(a)) * oracle::hermite_product(up.indices()[a], v);
    }
    const double exact = v[1] * v[1] - 0.5 * v[0] * v[0] * v[1] * v[1];
    CHECK(std::abs(s - exact) < 1e-11 * (1.0 + std::abs(exact)));
  }
}

TEST_CASE("assembled operators: structure and conservation")
{
  const fixture::Setup& s = fixture::hard_spheres();
  const OperatorSet& ops = s.ops;
  const double scale = max_abs(ops.L);
  CHECK(symmetry_defect(ops.L) <= 1e-12 * scale);
  CHECK(symmetry_defect(ops.Lambda) <= 1e-12 * scale);
  CHECK(max_abs(ops.L - ops.Lm - ops.Lb) <= 1e-12 * scale);
  CHECK(max_abs(ops.L - ops.K + ops.Lambda) <= 1e-12 * scale);
  CHECK(max_abs(ops.HGram - ops.Lambda) == 0.0);
  CHECK(max_abs(ops.L * s.bases.ker_L) <= 1e-10 * scale);
  CHECK(max_abs(ops.Lm * s.bases.ker_Lm) <= 1e-10 * scale);

  // Spectrum of L lies in (-nu_max - tol, 0].
  const EigenSystem e = symmetric_eigen(ops.L);
  double nu_max = 0.0;
  const QuadratureRule nodes = hermite_rule_3d(s.disc.hermite_q);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (int i = 0; i < 2; ++i) {
      nu_max = std::max(nu_max, collision_frequency(s.mixture, s.family, i, nodes.point(k)));
    }
  }
  CHECK(e.values.maxCoeff() <= 1e-8 * scale);
  CHECK(e.values.minCoeff() > -nu_max - 1e-8);
  int zero = 0;
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    zero += std::abs(e.values(k)) <= 1e-8 * scale ? 1 : 0;
  }
  CHECK(zero == 6);
  // Lm and Lb are each dissipative.
  CHECK(symmetric_eigen(ops.Lm).values.maxCoeff() <= 1e-8 * scale);
  CHECK(symmetric_eigen(ops.Lb).values.maxCoeff() <= 1e-8 * scale);
}

TEST_CASE("Lambda is the frequency-weighted Gram matrix")
{
  const fixture::Setup& s = fixture::hard_spheres();
  const HermiteBasis& b = s.ops.basis;
  const std::size_t P = b.per_species();
  const QuadratureRule rule = hermite_rule_3d(30);
  Matrix ref = Matrix::Zero(s.ops.Lambda.rows(), s.ops.Lambda.cols());
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const Vec3 v = rule.point(k);
    const double nu = s.mixture.rho_total() * oracle::mean_distance_closed(norm(v));
    std::vector<double> h(P);
    for (std::size_t a = 0; a < P; ++a) {
      h[a] = oracle::hermite_product(b.indices()[a], v);
    }
    for (int i = 0; i < 2; ++i) {
      for (std::size_t x = 0; x < P; ++x) {
        for (std::size_t y = 0; y < P; ++y) {
          ref(static_cast<Eigen::Index>(b.index(i, x)), static_cast<Eigen::Index>(b.index(i, y))) +=
              rule.weights[k] * nu * h[x] * h[y];
        }
      }
    }
  }
  CHECK(max_abs(ref - s.ops.Lambda) < 1e-3 * max_abs(ref));
}

TEST_CASE("Maxwell molecules reproduce the closed-form spectrum")
{
  const fixture::Setup& s = fixture::maxwell();
  const std::vector<double> ref = oracle::maxwell_molecule_spectrum(fixture::isotropic(), 1.0, 1.0, 4);
  const EigenSystem e = symmetric_eigen(-s.ops.L);
  REQUIRE(static_cast<std::size_t>(e.values.size()) == ref.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    worst = std::max(worst, std::abs(e.values(static_cast<Eigen::Index>(k)) - ref[k]));
  }
  CHECK(worst < 1e-10);
  // Lowest nonzero eigenvalue for isotropic b = 1 / (4 pi).
  CHECK(std::abs(ref[5] - 1.0 / 3.0) < 1e-12);

  // Changing rho scales the spectrum linearly.
  const fixture::Setup t({2.5}, 0.0, 3);
  const std::vector<double> ref3 = oracle::maxwell_molecule_spectrum(fixture::isotropic(), 1.0, 2.5, 3);
  const EigenSystem e3 = symmetric_eigen(-t.ops.L);
  for (std::size_t k = 0; k < ref3.size(); ++k) {
    CHECK(std::abs(e3.values(static_cast<Eigen::Index>(k)) - ref3[k]) < 1e-10);
  }
}

TEST_CASE("weak-form Monte-Carlo agrees with the assembled quadratic form")
{
  const fixture::Setup& s = fixture::hard_spheres();
  const HermiteBasis& b = s.ops.basis;
  const std::size_t low = simplex_size(2);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 2; ++trial) {
    Vector f = Vector::Zero(static_cast<Eigen::Index>(b.total_size()));
    for (int i = 0; i < 2; ++i) {
      for (std::size_t a = 1; a < low; ++a) {
        f(static_cast<Eigen::Index>(b.index(i, a))) = g(rng);
      }
    }
    f.normalize();
    const double exact = -f.dot(s.ops.L * f);
    const oracle::McValue mc = oracle::weak_form_dissipation(s.mixture, s.family, b, f, 60000, 1000 + static_cast<std::uint64_t>(trial));
    CHECK(std::abs(mc.mean - exact) < 4.0 * mc.std_err);
  }
}

TEST_CASE("assembly does not depend on the thread count")
{
  const Mixture m({1.0, 0.5});
  const KernelFamily f = uniform_family(2, PowerLaw{1.0, 0.5}, fixture::isotropic());
  Discretization d;
  d.N = 3;
  d.hermite_q = 6;
  const OperatorSet a = assemble_operators(m, f, d, 1);
  const OperatorSet c = assemble_operators(m, f, d, 3);
  CHECK(max_abs(a.L - c.L) <= 1e-12);
  CHECK(max_abs(a.Lambda - c.Lambda) <= 1e-12);
  CHECK(max_abs(a.Lb - c.Lb) <= 1e-12);
}

TEST_CASE("degree-N operators are principal blocks of degree-(N+1) operators")
{
  const Mixture m({1.0});
  const KernelFamily f = uniform_family(1, PowerLaw{1.0, 1.0}, fixture::isotropic());
  Discretization d3;
  d3.N = 3;
  Discretization d4;
  d4.N = 4;
  const OperatorSet a = assemble_operators(m, f, d3);
  const OperatorSet b = assemble_operators(m, f, d4);
  const Eigen::Index P = a.L.rows();
  CHECK(max_abs(a.L - b.L.topLeftCorner(P, P)) < 1e-10);
}

TEST_CASE("vgram is the exact gradient form")
{
  const fixture::Setup& s = fixture::hard_spheres();
  // |grad M_i^{1/2}|^2 integrates to 3 rho_i / 4.
  for (int i = 0; i < 2; ++i) {
    const Vector f = embed_one(s.mixture, s.ops.basis, i);
    CHECK(f.dot(s.ops.vgram * f) == doctest::Approx(0.75 * s.mixture.rho(i)).epsilon(1e-12));
  }
  CHECK(s.ops.grad_truncation > 0.0);
}

TEST_CASE("operator CSV export")
{
  Matrix m(2, 2);
  m << 1.0, -2.5, 3.0, 4.0;
  const std::string path = "kgap_test_operator.csv";
  write_operator_csv(path, "L", m, {{"N", "4"}});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("#", 0) == 0);
  CHECK(header.find("L") != std::string::npos);
  double x = 0.0;
  char comma = 0;
  in >> x >> comma;
  CHECK(x == 1.0);
  in >> x;
  CHECK(x == -2.5);
  in.close();
  std::remove(path.c_str());
}
