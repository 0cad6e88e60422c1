#pragma once

#include <numbers>

#include "kgap/galerkin.hpp"
#include "kgap/kernels.hpp"
#include "kgap/mixture.hpp"

namespace fixture {

inline kgap::AngularPolynomial isotropic()
{
  return kgap::AngularPolynomial{{1.0 / (4.0 * std::numbers::pi)}};
}

struct Setup
{
  kgap::Mixture mixture;
  kgap::KernelFamily family;
  kgap::Discretization disc;
  kgap::OperatorSet ops;
  kgap::KernelBases bases;

  Setup(std::vector<double> rho, double gamma, int N)
      : mixture(std::move(rho))
  {
    family = kgap::uniform_family(mixture.n(), kgap::PowerLaw{1.0, gamma}, isotropic());
    disc.N = N;
    ops = kgap::assemble_operators(mixture, family, disc, 1);
    bases = kgap::kernel_bases(mixture, ops.basis);
  }
};

/// n = 2 hard spheres, N = 4.
inline const Setup& hard_spheres()
{
  static const Setup s({1.0, 0.5}, 1.0, 4);
  return s;
}

/// n = 1 Maxwell molecules, N = 4.
inline const Setup& maxwell()
{
  static const Setup s({1.0}, 0.0, 4);
  return s;
}

}  // namespace fixture
