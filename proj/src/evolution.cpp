#include "kgap/evolution.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kgap/parallel.hpp"
#include "kgap/quadrature.hpp"

namespace kgap {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

bool is_zero(const ModeIndex& m)
{
  return m[0] == 0 && m[1] == 0 && m[2] == 0;
}

double k_squared(const ModeIndex& m)
{
  const auto k = wave_vector(m);
  return k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
}

Matrix block_diag(const Matrix& a)
{
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  Matrix out = Matrix::Zero(2 * r, 2 * c);
  out.topLeftCorner(r, c) = a;
  out.bottomRightCorner(r, c) = a;
  return out;
}

Matrix skew_pair(const Matrix& a)
{
  const Eigen::Index d = a.rows();
  Matrix out = Matrix::Zero(2 * d, 2 * d);
  out.topRightCorner(d, d) = a;
  out.bottomLeftCorner(d, d) = -a;
  return out;
}

double quad(const Matrix& q, const Vector& z)
{
  return z.dot(q * z);
}

void check_dimensions(const Matrix& L, const std::array<Matrix, 3>& transport)
{
  if (L.rows() != L.cols()) {
    throw std::invalid_argument("mode_generator: L is not square");
  }
  for (const auto& t : transport) {
    if (t.rows() != L.rows() || t.cols() != L.cols()) {
      throw std::invalid_argument("mode_generator: transport and L dimensions differ");
    }
  }
}

}  // namespace

std::vector<ModeIndex> mode_set(int M_max)
{
  if (M_max < 0) {
    throw std::invalid_argument("mode_set: M_max must be >= 0");
  }
  std::vector<ModeIndex> out;
  for (int a = -M_max; a <= M_max; ++a) {
    for (int b = -M_max; b <= M_max; ++b) {
      for (int c = -M_max; c <= M_max; ++c) {
        out.push_back({a, b, c});
      }
    }
  }
  return out;
}

std::array<double, 3> wave_vector(const ModeIndex& m)
{
  return {two_pi * m[0], two_pi * m[1], two_pi * m[2]};
}

Matrix mode_generator(const Matrix& L, const std::array<Matrix, 3>& transport, const ModeIndex& m)
{
  check_dimensions(L, transport);
  Matrix s = Matrix::Zero(L.rows(), L.cols());
  for (int a = 0; a < 3; ++a) {
    if (m[static_cast<std::size_t>(a)] != 0) {
      s += two_pi * m[static_cast<std::size_t>(a)] * transport[static_cast<std::size_t>(a)];
    }
  }
  return block_diag(L) + skew_pair(s);
}

Matrix expm(const Matrix& a)
{
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("expm: matrix is not square");
  }
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  if (n == 0) {
    return id;
  }
  static constexpr double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) {
    throw NumericalError("expm: non-finite entries");
  }
  int s = 0;
  if (norm1 > theta13) {
    s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const Matrix x = a / std::ldexp(1.0, s);
  const Matrix x2 = x * x;
  const Matrix x4 = x2 * x2;
  const Matrix x6 = x4 * x2;
  const Matrix u = x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 +
                        b[3] * x2 + b[1] * id);
  const Matrix v =
      x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;
  Matrix r = Eigen::PartialPivLU<Matrix>(v - u).solve(v + u);
  for (int k = 0; k < s; ++k) {
    r = r * r;
  }
  return r;
}

Scheme parse_scheme(const std::string& name)
{
  if (name == "expm") {
    return Scheme::expm;
  }
  if (name == "midpoint" || name == "implicit_midpoint") {
    return Scheme::midpoint;
  }
  throw std::invalid_argument("unknown scheme '" + name + "' (expected expm or midpoint)");
}

std::string to_string(Scheme scheme)
{
  return scheme == Scheme::expm ? "expm" : "midpoint";
}

Matrix step_matrix(const Matrix& generator, double dt, Scheme scheme, bool allow_stiff)
{
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step_matrix: dt must be positive");
  }
  if (scheme == Scheme::expm) {
    return expm(dt * generator);
  }
  const double norm1 = generator.cwiseAbs().colwise().sum().maxCoeff();
  if (dt * norm1 > 1e3 && !allow_stiff) {
    std::ostringstream msg;
    msg << "implicit midpoint: dt*||A|| = " << dt * norm1 << " exceeds 1e3";
    throw NumericalError(msg.str());
  }
  const Matrix id = Matrix::Identity(generator.rows(), generator.cols());
  return Eigen::PartialPivLU<Matrix>(id - 0.5 * dt * generator).solve(id + 0.5 * dt * generator);
}

Trajectory evolve(const Matrix& L, const std::array<Matrix, 3>& transport, const TorusState& initial,
                  const EvolveOptions& options)
{
  if (!(options.t_end >= 0.0) || options.record_every < 1) {
    throw std::invalid_argument("evolve: t_end must be >= 0 and record_every >= 1");
  }
  const auto steps = static_cast<std::size_t>(std::ceil(options.t_end / options.dt - 1e-9));
  const std::size_t records = steps / static_cast<std::size_t>(options.record_every) + 1;
  Trajectory traj;
  traj.times.resize(records);
  traj.states.assign(records, initial);
  for (std::size_t r = 0; r < records; ++r) {
    traj.times[r] = initial.time + static_cast<double>(r * static_cast<std::size_t>(options.record_every)) * options.dt;
    traj.states[r].time = traj.times[r];
  }
  parallel_for(initial.modes.size(), options.threads, [&](std::size_t k) {
    const ModeState& mode = initial.modes[k];
    if (mode.coeffs.size() != 2 * L.rows()) {
      throw std::invalid_argument("evolve: mode coefficient length differs from 2 * total_size");
    }
    const Matrix a = mode_generator(L, transport, mode.m);
    const Matrix step = step_matrix(a, options.dt, options.scheme, options.allow_stiff);
    Vector z = mode.coeffs;
    std::size_t r = 1;
    for (std::size_t s = 1; s <= steps; ++s) {
      z = step * z;
      if (s % static_cast<std::size_t>(options.record_every) == 0) {
        traj.states[r++].modes[k].coeffs = z;
      }
    }
  });
  return traj;
}

Matrix h1_form(const OperatorSet& ops, const ModeIndex& m)
{
  const Eigen::Index d = ops.L.rows();
  return (1.0 + k_squared(m)) * Matrix::Identity(2 * d, 2 * d) + block_diag(ops.vgram);
}

double h1_norm(const TorusState& state, const OperatorSet& ops)
{
  std::vector<double> parts;
  parts.reserve(state.modes.size());
  for (const auto& mode : state.modes) {
    const Eigen::Index d = ops.L.rows();
    const Vector x = mode.coeffs.head(d);
    const Vector y = mode.coeffs.tail(d);
    parts.push_back((1.0 + k_squared(mode.m)) * mode.coeffs.squaredNorm() + quad(ops.vgram, x) +
                    quad(ops.vgram, y));
  }
  return pairwise_sum(parts);
}

void HypoCoefficients::validate() const
{
  if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0) || !std::isfinite(c4)) {
    throw std::invalid_argument("hypocoercive coefficients: c1, c2, c3 must be positive");
  }
  if (!(c4 * c4 < c2 * c3)) {
    throw std::invalid_argument("hypocoercive coefficients: c4^2 must be below c2*c3");
  }
}

Matrix hypo_form(const OperatorSet& ops, const HypoCoefficients& c, const ModeIndex& m)
{
  const Eigen::Index d = ops.L.rows();
  const auto k = wave_vector(m);
  Matrix q = (c.c1 + c.c2 * k_squared(m)) * Matrix::Identity(2 * d, 2 * d) + c.c3 * block_diag(ops.vgram);
  for (int a = 0; a < 3; ++a) {
    const double ka = k[static_cast<std::size_t>(a)];
    if (ka != 0.0 && c.c4 != 0.0) {
      q += c.c4 * ka * skew_pair(ops.grad_v[static_cast<std::size_t>(a)]);
    }
  }
  return q;
}

double hypo_functional(const TorusState& state, const HypoCoefficients& c, const OperatorSet& ops)
{
  c.validate();
  std::vector<double> parts;
  parts.reserve(state.modes.size());
  for (const auto& mode : state.modes) {
    parts.push_back(quad(hypo_form(ops, c, mode.m), mode.coeffs));
  }
  return pairwise_sum(parts);
}

Equivalence equivalence_constants(const HypoCoefficients& c)
{
  c.validate();
  const double half = 0.5 * std::abs(c.c4);
  const double mean = 0.5 * (c.c2 + c.c3);
  const double radius = std::hypot(0.5 * (c.c2 - c.c3), half);
  return {std::min(c.c1, mean - radius), std::max(c.c1, mean + radius)};
}

Vector equilibrium(const TorusState& state, const Matrix& ker_L)
{
  for (const auto& mode : state.modes) {
    if (is_zero(mode.m)) {
      return project(ker_L, mode.coeffs.head(ker_L.rows()));
    }
  }
  return Vector::Zero(ker_L.rows());
}

TorusState subtract_equilibrium(const TorusState& state, const Vector& f_inf)
{
  TorusState out = state;
  for (auto& mode : out.modes) {
    if (is_zero(mode.m)) {
      mode.coeffs.head(f_inf.size()) -= f_inf;
    }
  }
  return out;
}

InitialKind parse_initial_kind(const std::string& name)
{
  if (name == "random_perturbation") {
    return InitialKind::random_perturbation;
  }
  if (name == "equilibrium") {
    return InitialKind::equilibrium;
  }
  throw std::invalid_argument("unknown initial kind '" + name +
                              "' (expected random_perturbation or equilibrium)");
}

TorusState initial_state(const OperatorSet& ops, const KernelBases& bases, int M_max,
                         InitialKind kind, double amplitude, std::uint64_t seed)
{
  const Eigen::Index d = ops.L.rows();
  const auto modes = mode_set(M_max);
  TorusState state;
  state.modes.reserve(modes.size());
  for (const auto& m : modes) {
    state.modes.push_back({m, Vector::Zero(2 * d)});
  }
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_vector = [&](Eigen::Index size) {
    Vector v(size);
    for (Eigen::Index k = 0; k < size; ++k) {
      v(k) = normal(rng);
    }
    return v;
  };
  const std::size_t centre = modes.size() / 2;  // m = 0
  {
    Vector ker = bases.ker_L * random_vector(bases.ker_L.cols());
    ker *= amplitude / ker.norm();
    state.modes[centre].coeffs.head(d) = ker;
  }
  if (kind == InitialKind::equilibrium) {
    return state;
  }
  {
    Vector local = bases.ker_Lm * random_vector(bases.ker_Lm.cols());
    local -= project(bases.ker_L, local);
    Vector generic = random_vector(d);
    generic -= project(bases.ker_L, generic);
    state.modes[centre].coeffs.head(d) +=
        amplitude * (local / local.norm() + 0.5 * generic / generic.norm());
  }
  // Modes after the centre determine their negatives.
  for (std::size_t k = centre + 1; k < modes.size(); ++k) {
    const double scale = amplitude / (1.0 + k_squared(modes[k]) / (two_pi * two_pi)) / std::sqrt(2.0 * static_cast<double>(d));
    Vector z = scale * random_vector(2 * d);
    state.modes[k].coeffs = z;
    Vector conj = z;
    conj.tail(d) = -z.tail(d);
    state.modes[modes.size() - 1 - k].coeffs = conj;
  }
  return state;
}

DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& values,
                   double transient, double floor)
{
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("fit_decay: times and values must be non-empty and equal length");
  }
  DecayFit fit;
  const double t_max = times.back();
  std::vector<double> t;
  std::vector<double> y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(values[k] > floor)) {
      fit.floor_limited = true;
      break;
    }
    if (times[k] >= transient * t_max) {
      t.push_back(times[k]);
      y.push_back(std::log(values[k]));
    }
  }
  if (t.size() < 20) {
    std::ostringstream msg;
    msg << "fit_decay: only " << t.size() << " samples in the fit window (need >= 20)";
    throw NumericalError(msg.str());
  }
  const auto n = static_cast<double>(t.size());
  const double tm = pairwise_sum(t) / n;
  const double ym = pairwise_sum(y) / n;
  std::vector<double> sxy(t.size());
  std::vector<double> sxx(t.size());
  std::vector<double> syy(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    sxy[k] = (t[k] - tm) * (y[k] - ym);
    sxx[k] = (t[k] - tm) * (t[k] - tm);
    syy[k] = (y[k] - ym) * (y[k] - ym);
  }
  const double slope = pairwise_sum(sxy) / pairwise_sum(sxx);
  const double intercept = ym - slope * tm;
  std::vector<double> res(t.size());
  fit.envelope_ratio = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = y[k] - (intercept + slope * t[k]);
    res[k] = r * r;
    fit.envelope_ratio = std::max(fit.envelope_ratio, std::exp(r));
  }
  const double ss_tot = pairwise_sum(syy);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - pairwise_sum(res) / ss_tot : 1.0;
  fit.tau = -slope;
  fit.C = std::exp(intercept);
  fit.t_start = t.front();
  fit.t_stop = t.back();
  fit.samples = t.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Coefficient search

namespace {

/// Representatives of the signed-permutation orbits: M_max >= m0 >= m1 >= m2 >= 0.
std::vector<ModeIndex> orbit_representatives(int M_max)
{
  std::vector<ModeIndex> out;
  for (int a = 0; a <= M_max; ++a) {
    for (int b = 0; b <= a; ++b) {
      for (int c = 0; c <= b; ++c) {
        out.push_back({a, b, c});
      }
    }
  }
  return out;
}

Matrix admissible_basis(const Matrix& ker_L, const ModeIndex& m)
{
  const Eigen::Index size = 2 * ker_L.rows();
  if (!is_zero(m)) {
    return Matrix::Identity(size, size);
  }
  return orthogonal_complement(block_diag(ker_L));
}

/// The four parts of W = -(Q A + A^T Q), one per coefficient, in coordinates
/// where the H^1 form on the admissible subspace is the identity.
struct SearchMode
{
  ModeIndex m;
  std::array<Matrix, 4> parts;
};

SearchMode build_search_mode(const OperatorSet& ops, const Matrix& ker_L, const ModeIndex& m)
{
  const Eigen::Index d = ops.L.rows();
  const Matrix a = mode_generator(ops.L, ops.transport, m);
  const Matrix z = admissible_basis(ker_L, m);
  const Matrix pz = z.transpose() * h1_form(ops, m) * z;
  const Matrix lc = cholesky_lower(0.5 * (pz + pz.transpose()), "H1 form");
  const Matrix x = lc.triangularView<Eigen::Lower>().solve(z.transpose());
  const auto k = wave_vector(m);
  std::array<Matrix, 4> q;
  q[0] = Matrix::Identity(2 * d, 2 * d);
  q[1] = k_squared(m) * Matrix::Identity(2 * d, 2 * d);
  q[2] = block_diag(ops.vgram);
  q[3] = Matrix::Zero(2 * d, 2 * d);
  for (int ax = 0; ax < 3; ++ax) {
    const double ka = k[static_cast<std::size_t>(ax)];
    if (ka != 0.0) {
      q[3] += ka * skew_pair(ops.grad_v[static_cast<std::size_t>(ax)]);
    }
  }
  SearchMode out;
  out.m = m;
  for (std::size_t j = 0; j < 4; ++j) {
    const Matrix w = -(q[j] * a + a.transpose() * q[j]);
    const Matrix t = x * w * x.transpose();
    out.parts[j] = 0.5 * (t + t.transpose());
  }
  return out;
}

double mode_margin(const SearchMode& mode, const HypoCoefficients& c)
{
  const Matrix w = c.c1 * mode.parts[0] + c.c2 * mode.parts[1] + c.c3 * mode.parts[2] +
                   c.c4 * mode.parts[3];
  const Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("coefficient search: eigenvalue solver failed");
  }
  return es.eigenvalues()(0);
}

double margin_over(const std::vector<SearchMode>& modes, const HypoCoefficients& c)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& mode : modes) {
    best = std::min(best, mode_margin(mode, c));
  }
  return best;
}

std::vector<SearchMode> build_search_modes(const OperatorSet& ops, const Matrix& ker_L, int M_max)
{
  std::vector<SearchMode> out;
  for (const auto& m : orbit_representatives(M_max)) {
    out.push_back(build_search_mode(ops, ker_L, m));
  }
  return out;
}

HypoCoefficients coefficients_from(double log_c2, double log_c3, double s)
{
  HypoCoefficients c;
  c.c1 = 1.0;
  c.c2 = std::pow(10.0, log_c2);
  c.c3 = std::pow(10.0, log_c3);
  c.c4 = s * std::sqrt(c.c2 * c.c3);
  return c;
}

}  // namespace

double dissipation_margin(const OperatorSet& ops, const Matrix& ker_L, const HypoCoefficients& c,
                          int M_max)
{
  c.validate();
  return margin_over(build_search_modes(ops, ker_L, M_max), c);
}

double slowest_mode_rate(const OperatorSet& ops, const Matrix& ker_L, int M_max)
{
  double rate = std::numeric_limits<double>::infinity();
  for (const auto& m : orbit_representatives(M_max)) {
    if (is_zero(m)) {
      const Matrix z = orthogonal_complement(ker_L);
      const Matrix r = z.transpose() * ops.L * z;
      const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (r + r.transpose()), Eigen::EigenvaluesOnly);
      rate = std::min(rate, -es.eigenvalues()(es.eigenvalues().size() - 1));
      continue;
    }
    const auto k = wave_vector(m);
    Matrix s = Matrix::Zero(ops.L.rows(), ops.L.cols());
    for (int ax = 0; ax < 3; ++ax) {
      s += k[static_cast<std::size_t>(ax)] * ops.transport[static_cast<std::size_t>(ax)];
    }
    Eigen::MatrixXcd a(ops.L.rows(), ops.L.cols());
    a.real() = ops.L;
    a.imag() = -s;
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, false);
    if (es.info() != Eigen::Success) {
      throw NumericalError("slowest_mode_rate: complex eigenvalue solver failed");
    }
    rate = std::min(rate, -es.eigenvalues().real().maxCoeff());
  }
  return rate;
}

CoefficientSearch search_coefficients(const OperatorSet& ops, const Matrix& ker_L, int M_max,
                                      std::size_t samples, std::uint64_t seed)
{
  const std::vector<SearchMode> modes = build_search_modes(ops, ker_L, M_max);
  CoefficientSearch out;
  auto objective = [&](const HypoCoefficients& c) {
    ++out.candidates;
    return margin_over(modes, c) / equivalence_constants(c).kappa2;
  };

  // Coarse grid in (log10 c2, log10 c3, c4 / sqrt(c2 c3)), then pattern search.
  double best_val = -std::numeric_limits<double>::infinity();
  std::array<double, 3> best{0.0, 0.0, 0.0};
  for (double l2 = -4.0; l2 <= 1.0 + 1e-9; l2 += 0.5) {
    for (double l3 = -4.0; l3 <= 1.0 + 1e-9; l3 += 0.5) {
      for (double s : {-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9}) {
        const double v = objective(coefficients_from(l2, l3, s));
        if (v > best_val) {
          best_val = v;
          best = {l2, l3, s};
        }
      }
    }
  }
  std::array<double, 3> step{0.25, 0.25, 0.15};
  for (int iter = 0; iter < 60 && step[0] > 1e-3; ++iter) {
    bool improved = false;
    for (std::size_t axis = 0; axis < 3; ++axis) {
      for (double sign : {-1.0, 1.0}) {
        std::array<double, 3> trial = best;
        trial[axis] += sign * step[axis];
        trial[2] = std::clamp(trial[2], -0.99, 0.99);
        const double v = objective(coefficients_from(trial[0], trial[1], trial[2]));
        if (v > best_val) {
          best_val = v;
          best = trial;
          improved = true;
        }
      }
    }
    if (!improved) {
      for (auto& s : step) {
        s *= 0.5;
      }
    }
  }

  out.coeffs = coefficients_from(best[0], best[1], best[2]);
  out.equivalence = equivalence_constants(out.coeffs);
  out.kappa = std::numeric_limits<double>::infinity();
  for (const auto& mode : modes) {
    const double v = mode_margin(mode, out.coeffs);
    out.mode_margins.emplace_back(mode.m, v);
    out.kappa = std::min(out.kappa, v);
  }
  out.rate = out.kappa / out.equivalence.kappa2;
  out.ceiling = 2.0 * slowest_mode_rate(ops, ker_L, M_max);

  // Sampled check of dG/dt <= -kappa ||f||^2_{H^1} over every tracked mode.
  const auto all = mode_set(M_max);
  std::map<ModeIndex, std::pair<Matrix, Matrix>> cache;
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = ops.L.rows();
  const Matrix ker2 = block_diag(ker_L);
  out.worst_sample_margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const ModeIndex m = all[pick(rng)];
    auto it = cache.find(m);
    if (it == cache.end()) {
      const Matrix a = mode_generator(ops.L, ops.transport, m);
      const Matrix q = hypo_form(ops, out.coeffs, m);
      it = cache.emplace(m, std::make_pair(Matrix(-(q * a + a.transpose() * q)), h1_form(ops, m))).first;
    }
    Vector z(2 * d);
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      z(k) = normal(rng);
    }
    if (is_zero(m)) {
      z -= project(ker2, z);
    }
    const double p = quad(it->second.second, z);
    const double margin = (quad(it->second.first, z) - out.kappa * p) / p;
    out.worst_sample_margin = std::min(out.worst_sample_margin, margin);
    if (margin < -1e-8) {
      ++out.violations;
    }
  }
  out.samples = samples;

  // Without the mixed term, ker(L) states at m != 0 are not dissipated.
  if (M_max >= 1) {
    HypoCoefficients plain = out.coeffs;
    plain.c4 = 0.0;
    const ModeIndex m{1, 0, 0};
    const Matrix a = mode_generator(ops.L, ops.transport, m);
    const Matrix q = hypo_form(ops, plain, m);
    const Matrix w = ker2.transpose() * (-(q * a + a.transpose() * q)) * ker2;
    const Matrix p = ker2.transpose() * h1_form(ops, m) * ker2;
    out.c4_zero_margin = generalized_eigen(0.5 * (w + w.transpose()), 0.5 * (p + p.transpose()),
                                           "H1 form on ker(L)")
                             .values(0);
  }
  out.success = out.kappa > 0.0 && out.violations == 0 && out.rate <= out.ceiling * (1.0 + 1e-6);
  return out;
}

}  // namespace kgap
