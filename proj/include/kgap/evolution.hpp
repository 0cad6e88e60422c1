#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kgap/galerkin.hpp"
#include "kgap/linalg.hpp"
#include "kgap/mixture.hpp"

namespace kgap {

using ModeIndex = std::array<int, 3>;

/// One Fourier mode of the torus. coeffs = [Re c; Im c], length 2 * total_size.
struct ModeState
{
  ModeIndex m{0, 0, 0};
  Vector coeffs;
};

struct TorusState
{
  std::vector<ModeState> modes;
  double time = 0.0;
};

/// Every m with |m|_inf <= M_max, lexicographic order, closed under negation.
std::vector<ModeIndex> mode_set(int M_max);

/// k = 2 pi m.
std::array<double, 3> wave_vector(const ModeIndex& m);

/**
 * L - 2 pi i sum_a m_a T_a in real blocked form [[L, S], [-S, L]] with
 * S = 2 pi sum_a m_a T_a, acting on [Re c; Im c].
 */
Matrix mode_generator(const Matrix& L, const std::array<Matrix, 3>& transport, const ModeIndex& m);

/// Scaling and squaring with the degree-13 Pade approximant.
Matrix expm(const Matrix& a);

enum class Scheme
{
  expm,
  midpoint
};

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

/// One-step propagator. Midpoint throws when dt * ||A||_1 > 1e3 unless allow_stiff.
Matrix step_matrix(const Matrix& generator, double dt, Scheme scheme, bool allow_stiff = false);

struct EvolveOptions
{
  double dt = 0.1;
  double t_end = 1.0;
  Scheme scheme = Scheme::expm;
  bool allow_stiff = false;
  int record_every = 1;
  int threads = 1;
};

struct Trajectory
{
  std::vector<double> times;
  std::vector<TorusState> states;
};

/// Advances every mode independently with a fixed step; states are recorded
/// at t = 0 and every record_every steps.
Trajectory evolve(const Matrix& L, const std::array<Matrix, 3>& transport, const TorusState& initial,
                  const EvolveOptions& options);

/// Blocked quadratic form of the squared H^1_{x,v} norm on one mode.
Matrix h1_form(const OperatorSet& ops, const ModeIndex& m);

/// ||f||^2 + sum_m |2 pi m|^2 ||f_m||^2 + ||grad_v f||^2 over all modes.
double h1_norm(const TorusState& state, const OperatorSet& ops);

struct HypoCoefficients
{
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double c4 = 0.0;

  /// Throws std::invalid_argument unless c1, c2, c3 > 0 and c4^2 < c2 c3.
  void validate() const;
};

/// Blocked quadratic form of G on one mode.
Matrix hypo_form(const OperatorSet& ops, const HypoCoefficients& c, const ModeIndex& m);

/// c1 ||f||^2 + c2 ||grad_x f||^2 + c3 ||grad_v f||^2 + c4 Re(grad_x f, grad_v f).
double hypo_functional(const TorusState& state, const HypoCoefficients& c, const OperatorSet& ops);

struct Equivalence
{
  double kappa1 = 0.0;
  double kappa2 = 0.0;
};

/// kappa1 ||f||^2_{H^1} <= G <= kappa2 ||f||^2_{H^1}.
Equivalence equivalence_constants(const HypoCoefficients& c);

/// ker(L) projection of the real part of mode 0.
Vector equilibrium(const TorusState& state, const Matrix& ker_L);

/// state minus the equilibrium placed on mode 0.
TorusState subtract_equilibrium(const TorusState& state, const Vector& f_inf);

enum class InitialKind
{
  random_perturbation,
  equilibrium
};

InitialKind parse_initial_kind(const std::string& name);

/**
 * Real initial data on mode_set(M_max): coeffs(-m) = conj(coeffs(m)). The
 * random kind carries ker(L) content, ker(L^m) content outside ker(L), and a
 * generic perturbation damped like 1 / (1 + |m|^2).
 */
TorusState initial_state(const OperatorSet& ops, const KernelBases& bases, int M_max,
                         InitialKind kind, double amplitude, std::uint64_t seed);

struct DecayFit
{
  double tau = 0.0;
  double C = 0.0;
  double r_squared = 0.0;
  double t_start = 0.0;
  double t_stop = 0.0;
  std::size_t samples = 0;
  double envelope_ratio = 0.0;  // max over the window of value / (C e^{-tau t})
  bool floor_limited = false;
};

/// Log-linear least squares on samples with t >= transient * t_max and value
/// above the floor. Throws NumericalError with fewer than 20 usable samples.
DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& values,
                   double transient = 0.2, double floor = 1e-13);

/// min over tracked modes of -Re(eigenvalue) of the mode generator, with the
/// kernel of L removed at m = 0.
double slowest_mode_rate(const OperatorSet& ops, const Matrix& ker_L, int M_max);

struct CoefficientSearch
{
  HypoCoefficients coeffs;
  double kappa = 0.0;       // dG/dt <= -kappa ||f - f_inf||^2_{H^1}
  Equivalence equivalence;
  double rate = 0.0;        // kappa / kappa2, the guaranteed decay rate of G
  double ceiling = 0.0;     // 2 * slowest_mode_rate
  std::size_t candidates = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_sample_margin = 0.0;
  double c4_zero_margin = 0.0;  // best margin with c4 = 0 on ker(L) states at m = (1,0,0)
  std::vector<std::pair<ModeIndex, double>> mode_margins;
  bool success = false;
};

CoefficientSearch search_coefficients(const OperatorSet& ops, const Matrix& ker_L, int M_max,
                                      std::size_t samples, std::uint64_t seed);

/// min over orbit representatives of lambda_min(W, P) on the admissible subspace,
/// W = -(Q A + A^T Q), P = h1_form.
double dissipation_margin(const OperatorSet& ops, const Matrix& ker_L, const HypoCoefficients& c,
                          int M_max);

}  // namespace kgap
