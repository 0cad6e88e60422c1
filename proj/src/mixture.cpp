#include "kgap/mixture.hpp"

#include <cmath>
#include <numeric>
#include <regex>
#include <stdexcept>

namespace kgap {

Mixture::Mixture(std::vector<double> rho_inf)
    : rho_(std::move(rho_inf))
    , total_(0.0)
{
  if (rho_.empty()) {
    throw std::invalid_argument("mixture: at least one species is required");
  }
  for (std::size_t i = 0; i < rho_.size(); ++i) {
    if (!(rho_[i] > 0.0) || !std::isfinite(rho_[i])) {
      throw std::invalid_argument("mixture: rho_inf of species " + std::to_string(i + 1) +
                                  " must be positive and finite");
    }
  }
  total_ = pairwise_sum(rho_);
}

Monomial parse_monomial(const std::string& text)
{
  if (text == "1") {
    return {MonomialKind::one, 0, 0};
  }
  if (text == "|v|^2" || text == "|v|2") {
    return {MonomialKind::speed2, 0, 0};
  }
  if (text == "|v|^4" || text == "|v|4") {
    return {MonomialKind::speed4, 0, 0};
  }
  static const std::regex product(R"(v([123])v([123]))");
  std::smatch m;
  if (std::regex_match(text, m, product)) {
    return {MonomialKind::product, std::stoi(m[1]) - 1, std::stoi(m[2]) - 1};
  }
  throw std::invalid_argument("unsupported monomial '" + text +
                              "' (expected 1, vjvk with j,k in 1..3, |v|^2 or |v|^4)");
}

double maxwellian_moment(const Mixture& mixture, int i, const Monomial& monomial)
{
  if (i < 0 || i >= mixture.n()) {
    throw std::invalid_argument("maxwellian_moment: species index out of range");
  }
  const double rho = mixture.rho(i);
  switch (monomial.kind) {
    case MonomialKind::one:
      return rho;
    case MonomialKind::product:
      if (monomial.j < 0 || monomial.j > 2 || monomial.k < 0 || monomial.k > 2) {
        throw std::invalid_argument("maxwellian_moment: axis out of range");
      }
      return monomial.j == monomial.k ? rho : 0.0;
    case MonomialKind::speed2:
      return 3.0 * rho;
    case MonomialKind::speed4:
      return 15.0 * rho;
  }
  throw std::invalid_argument("maxwellian_moment: unsupported monomial");
}

namespace {

void require_degree(const HermiteBasis& basis, int minimum)
{
  if (basis.degree() < minimum) {
    throw std::invalid_argument("kernel bases need Hermite degree N >= " + std::to_string(minimum));
  }
}

std::size_t at(const HermiteBasis& basis, int i, const MultiIndex& a)
{
  return basis.index(i, static_cast<std::size_t>(basis.position(a)));
}

MultiIndex unit(int axis, int power)
{
  MultiIndex a{0, 0, 0};
  a[static_cast<std::size_t>(axis)] = power;
  return a;
}

}  // namespace

// M_i^{1/2} H_a = rho_i^{1/2} e_{a,i};  v_k = H_{1_k};  |v|^2 = 3 H_0 + sqrt(2) sum_k H_{2_k}.

Vector embed_one(const Mixture& mixture, const HermiteBasis& basis, int i)
{
  Vector f = Vector::Zero(static_cast<Eigen::Index>(basis.total_size()));
  f(static_cast<Eigen::Index>(at(basis, i, {0, 0, 0}))) = std::sqrt(mixture.rho(i));
  return f;
}

Vector embed_velocity(const Mixture& mixture, const HermiteBasis& basis, int i, int axis)
{
  require_degree(basis, 1);
  Vector f = Vector::Zero(static_cast<Eigen::Index>(basis.total_size()));
  f(static_cast<Eigen::Index>(at(basis, i, unit(axis, 1)))) = std::sqrt(mixture.rho(i));
  return f;
}

Vector embed_energy(const Mixture& mixture, const HermiteBasis& basis, int i)
{
  require_degree(basis, 2);
  const double s = std::sqrt(mixture.rho(i));
  Vector f = Vector::Zero(static_cast<Eigen::Index>(basis.total_size()));
  f(static_cast<Eigen::Index>(at(basis, i, {0, 0, 0}))) = 3.0 * s;
  for (int k = 0; k < 3; ++k) {
    f(static_cast<Eigen::Index>(at(basis, i, unit(k, 2)))) = std::sqrt(2.0) * s;
  }
  return f;
}

Vector embed_coefficients(const Mixture& mixture, const HermiteBasis& basis,
                          const ProjectionCoefficients& c)
{
  Vector f = Vector::Zero(static_cast<Eigen::Index>(basis.total_size()));
  for (int i = 0; i < mixture.n(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    f += c.alpha[s] * embed_one(mixture, basis, i) + c.e[s] * embed_energy(mixture, basis, i);
    for (int k = 0; k < 3; ++k) {
      f += c.u[s][static_cast<std::size_t>(k)] * embed_velocity(mixture, basis, i, k);
    }
  }
  return f;
}

Matrix ker_L_basis(const Mixture& mixture, const HermiteBasis& basis)
{
  require_degree(basis, 2);
  const int n = mixture.n();
  Matrix raw = Matrix::Zero(static_cast<Eigen::Index>(basis.total_size()), n + 4);
  for (int i = 0; i < n; ++i) {
    raw.col(i) = embed_one(mixture, basis, i);
    for (int k = 0; k < 3; ++k) {
      raw.col(n + k) += embed_velocity(mixture, basis, i, k);
    }
    raw.col(n + 3) += embed_energy(mixture, basis, i);
  }
  Matrix q = orthonormalize_columns(raw);
  if (q.cols() != n + 4) {
    throw NumericalError("ker_L_basis: collision invariants are linearly dependent");
  }
  return q;
}

Matrix ker_Lm_basis(const Mixture& mixture, const HermiteBasis& basis)
{
  require_degree(basis, 2);
  const int n = mixture.n();
  Matrix raw = Matrix::Zero(static_cast<Eigen::Index>(basis.total_size()), 5 * n);
  for (int i = 0; i < n; ++i) {
    raw.col(5 * i) = embed_one(mixture, basis, i);
    for (int k = 0; k < 3; ++k) {
      raw.col(5 * i + 1 + k) = embed_velocity(mixture, basis, i, k);
    }
    raw.col(5 * i + 4) = embed_energy(mixture, basis, i);
  }
  Matrix q = orthonormalize_columns(raw);
  if (q.cols() != 5 * n) {
    throw NumericalError("ker_Lm_basis: per-species invariants are linearly dependent");
  }
  return q;
}

ProjectionCoefficients extract_coefficients(const Mixture& mixture, const HermiteBasis& basis,
                                            const Vector& f)
{
  require_degree(basis, 2);
  if (f.size() != static_cast<Eigen::Index>(basis.total_size())) {
    throw std::invalid_argument("extract_coefficients: vector size does not match the basis");
  }
  ProjectionCoefficients out;
  for (int i = 0; i < mixture.n(); ++i) {
    const double rho = mixture.rho(i);
    const double s = std::sqrt(rho);
    const double m0 = s * f(static_cast<Eigen::Index>(at(basis, i, {0, 0, 0})));
    double m2 = 3.0 * m0;
    Vec3 u{};
    for (int k = 0; k < 3; ++k) {
      u[static_cast<std::size_t>(k)] = s * f(static_cast<Eigen::Index>(at(basis, i, unit(k, 1)))) / rho;
      m2 += std::sqrt(2.0) * s * f(static_cast<Eigen::Index>(at(basis, i, unit(k, 2))));
    }
    // rho (alpha + 3 e) = m0,  rho (3 alpha + 15 e) = m2
    const double det = rho * rho * (15.0 - 9.0);
    if (!(det > 0.0)) {
      throw NumericalError("extract_coefficients: singular moment system");
    }
    const double e = (m2 - 3.0 * m0) / (6.0 * rho);
    out.alpha.push_back(m0 / rho - 3.0 * e);
    out.u.push_back(u);
    out.e.push_back(e);
  }
  return out;
}

Vector project(const Matrix& q, const Vector& f)
{
  return q * (q.transpose() * f);
}

KernelBases kernel_bases(const Mixture& mixture, const HermiteBasis& basis)
{
  return {ker_L_basis(mixture, basis), ker_Lm_basis(mixture, basis)};
}

}  // namespace kgap
