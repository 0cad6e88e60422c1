#include "kgap/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kgap/linalg.hpp"
#include "kgap/quadrature.hpp"

namespace kgap {

double PowerLaw::operator()(double r) const
{
  if (gamma == 0.0) {
    return C;
  }
  return r <= 0.0 ? 0.0 : C * std::pow(r, gamma);
}

double AngularPolynomial::operator()(double c) const
{
  double s = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    s = s * c + *it;
  }
  return s;
}

double AngularPolynomial::derivative(double c) const
{
  double s = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) {
    s = s * c + static_cast<double>(k) * coeffs[k];
  }
  return s;
}

bool AngularPolynomial::is_even() const
{
  for (std::size_t k = 1; k < coeffs.size(); k += 2) {
    if (coeffs[k] != 0.0) {
      return false;
    }
  }
  return true;
}

int AngularPolynomial::degree() const
{
  int d = 0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k] != 0.0) {
      d = static_cast<int>(k);
    }
  }
  return d;
}

double AngularPolynomial::integral() const
{
  double s = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); k += 2) {
    s += 2.0 * coeffs[k] / static_cast<double>(k + 1);
  }
  return s;
}

void KernelFamily::validate() const
{
  if (n < 1) {
    throw std::invalid_argument("kernel: species count must be >= 1");
  }
  const auto size = static_cast<std::size_t>(n * n);
  if (phi.size() != size || b.size() != size) {
    throw std::invalid_argument("kernel: phi and b must be n x n with n = " + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& p = kinetic(i, j);
      const std::string where = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      if (!(p.C > 0.0) || !std::isfinite(p.C)) {
        throw std::invalid_argument("kernel: phi" + where + " needs C > 0");
      }
      if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) {
        std::ostringstream msg;
        msg << "kernel: phi" << where << " gamma = " << p.gamma << " outside [0, 1]";
        throw std::invalid_argument(msg.str());
      }
      const auto& a = angular(i, j);
      if (a.coeffs.empty()) {
        throw std::invalid_argument("kernel: b" + where + " has no coefficients");
      }
      for (double c : a.coeffs) {
        if (!std::isfinite(c)) {
          throw std::invalid_argument("kernel: b" + where + " has a non-finite coefficient");
        }
      }
    }
  }
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0.0 && std::isfinite(*v))) {
      throw std::invalid_argument(std::string("kernel: ") + name + " must be positive");
    }
  };
  positive(C1, "C1");
  positive(C2, "C2");
  positive(C3, "C3");
  positive(C4, "C4");
  positive(beta, "beta");
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    throw std::invalid_argument("kernel: delta must lie in (0, 1)");
  }
}

double KernelFamily::gamma_min() const
{
  double g = 1.0;
  for (const auto& p : phi) {
    g = std::min(g, p.gamma);
  }
  return g;
}

double KernelFamily::gamma_max() const
{
  double g = 0.0;
  for (const auto& p : phi) {
    g = std::max(g, p.gamma);
  }
  return g;
}

KernelFamily uniform_family(int n, PowerLaw phi, AngularPolynomial b)
{
  KernelFamily f;
  f.n = n;
  f.phi.assign(static_cast<std::size_t>(n * n), phi);
  f.b.assign(static_cast<std::size_t>(n * n), b);
  return f;
}

double evaluate_B(const KernelFamily& family, int i, int j, double s, double cos_theta)
{
  if (!(s > 0.0)) {
    throw std::invalid_argument("evaluate_B: relative speed must be positive");
  }
  if (!(cos_theta >= -1.0 && cos_theta <= 1.0)) {
    throw std::invalid_argument("evaluate_B: cos(theta) outside [-1, 1]");
  }
  return family.kinetic(i, j)(s) * family.angular(i, j)(cos_theta);
}

double angular_mass(const AngularPolynomial& b)
{
  return 2.0 * std::numbers::pi * b.integral();
}

namespace {

double theta_integral(const AngularPolynomial& b)
{
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double theta) { return b(std::cos(theta)) * std::sin(theta); };
  return gauss_kronrod<double, 31>::integrate(f, 0.0, std::numbers::pi, 15, 1e-14);
}

std::vector<Vec3> fibonacci_directions(int count)
{
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.push_back({r * std::cos(golden * k), r * std::sin(golden * k), z});
  }
  return out;
}

std::string pair_name(int i, int j)
{
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

}  // namespace

double compute_ell_b(const KernelFamily& family)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : family.b) {
    best = std::min(best, theta_integral(b));
  }
  return best;
}

double compute_C_b(const KernelFamily& family)
{
  const auto dirs = fibonacci_directions(32);
  const QuadratureRule s3 = lebedev_110();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < family.n; ++i) {
    const auto& b = family.angular(i, i);
    for (const auto& s1 : dirs) {
      for (const auto& s2 : dirs) {
        std::vector<double> terms(s3.size());
        for (std::size_t k = 0; k < s3.size(); ++k) {
          const Vec3 p = s3.point(k);
          terms[k] = s3.weights[k] * std::min(b(std::clamp(dot(s1, p), -1.0, 1.0)),
                                              b(std::clamp(dot(s2, p), -1.0, 1.0)));
        }
        best = std::min(best, pairwise_sum(terms));
      }
    }
  }
  return best;
}

bool AuditReport::passed() const
{
  return passed_except({});
}

bool AuditReport::passed_except(const std::vector<std::string>& waived) const
{
  for (const auto& v : verdicts) {
    if (!v.pass && std::find(waived.begin(), waived.end(), v.name) == waived.end()) {
      return false;
    }
  }
  return true;
}

const AssumptionVerdict& AuditReport::verdict(const std::string& name) const
{
  for (const auto& v : verdicts) {
    if (v.name == name) {
      return v;
    }
  }
  throw std::out_of_range("no verdict named " + name);
}

AuditReport audit_assumptions(const KernelFamily& family, std::size_t sample_budget,
                              std::uint64_t seed)
{
  if (sample_budget < 1000) {
    throw std::invalid_argument("audit_assumptions: sample budget must be >= 1000");
  }
  family.validate();
  const int n = family.n;
  AuditReport report;
  report.samples = sample_budget;

  // Shared sample sets: log grid in r, uniform grid in theta, random cosines.
  std::vector<double> radii(sample_budget);
  for (std::size_t k = 0; k < sample_budget; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(sample_budget - 1);
    radii[k] = std::pow(10.0, -6.0 + 12.0 * t);
  }
  std::vector<double> thetas(sample_budget);
  for (std::size_t k = 0; k < sample_budget; ++k) {
    thetas[k] = std::numbers::pi * static_cast<double>(k) / static_cast<double>(sample_budget - 1);
  }
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> cosines(sample_budget);
  for (auto& c : cosines) {
    c = unit(rng);
  }

  KernelConstants& kc = report.constants;
  double c_min = std::numeric_limits<double>::infinity();
  double c_max = 0.0;
  for (const auto& p : family.phi) {
    c_min = std::min(c_min, p.C);
    c_max = std::max(c_max, p.C);
  }
  kc.C1 = family.C1.value_or(c_min);
  kc.C2 = family.C2.value_or(c_max);
  kc.delta = family.delta.value_or(0.5);

  // A1: symmetry of descriptors.
  {
    AssumptionVerdict v{"A1", true, "B_ij = B_ji descriptor-wise", {}};
    for (int i = 0; i < n && v.pass; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const auto& p = family.kinetic(i, j);
        const auto& q = family.kinetic(j, i);
        if (p.C != q.C || p.gamma != q.gamma || family.angular(i, j).coeffs != family.angular(j, i).coeffs) {
          v.pass = false;
          v.detail = "kernel" + pair_name(i, j) + " differs from kernel" + pair_name(j, i);
          break;
        }
      }
    }
    report.verdicts.push_back(v);
  }

  // A2: product structure holds by construction; check nonnegativity of both factors.
  {
    AssumptionVerdict v{"A2", true, "B_ij = Phi_ij(r) b_ij(cos theta) with Phi_ij, b_ij >= 0", {}};
    for (int i = 0; i < n && v.pass; ++i) {
      for (int j = 0; j < n && v.pass; ++j) {
        for (double th : thetas) {
          const double val = family.angular(i, j)(std::cos(th));
          if (val < 0.0) {
            std::ostringstream msg;
            msg << "b" << pair_name(i, j) << "(cos " << th << ") = " << val << " < 0";
            v.pass = false;
            v.detail = msg.str();
            break;
          }
        }
      }
    }
    report.verdicts.push_back(v);
  }

  // A3: C1 r^gamma_ij <= Phi_ij(r) <= C2 (r + r^-delta), per pair exponent.
  {
    AssumptionVerdict v{"A3", true, "", {}};
    std::ostringstream det;
    det << "C1 = " << kc.C1 << ", C2 = " << kc.C2 << ", delta = " << kc.delta
        << ", gamma in [" << family.gamma_min() << ", " << family.gamma_max() << "]";
    v.detail = det.str();
    for (int i = 0; i < n && v.pass; ++i) {
      for (int j = 0; j < n && v.pass; ++j) {
        const auto& p = family.kinetic(i, j);
        for (double r : radii) {
          const double phi = p(r);
          const double lower = kc.C1 * std::pow(r, p.gamma);
          const double upper = kc.C2 * (r + std::pow(r, -kc.delta));
          if (lower > phi * (1.0 + 1e-12) || phi > upper * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "Phi" << pair_name(i, j) << "(" << r << ") = " << phi << " violates "
                << (lower > phi * (1.0 + 1e-12) ? "C1 r^gamma = " : "C2 (r + r^-delta) = ")
                << (lower > phi * (1.0 + 1e-12) ? lower : upper);
            v.pass = false;
            v.detail = msg.str();
            break;
          }
        }
      }
    }
    if (family.gamma_min() != family.gamma_max()) {
      v.notes.push_back("exponents differ between pairs; the lower bound is checked with each pair's own gamma");
    }
    report.verdicts.push_back(v);
  }

  // A4: 0 <= b <= C3, |b'| <= C4, C^b > 0.
  {
    AssumptionVerdict v{"A4", true, "", {}};
    double b_max = 0.0;
    double d_max = 0.0;
    for (const auto& b : family.b) {
      for (double th : thetas) {
        b_max = std::max(b_max, b(std::cos(th)));
        d_max = std::max(d_max, std::abs(b.derivative(std::cos(th))));
      }
    }
    kc.C3 = family.C3.value_or(b_max);
    kc.C4 = family.C4.value_or(std::max(d_max, 0.0));
    kc.C_b = compute_C_b(family);
    for (int i = 0; i < n && v.pass; ++i) {
      for (int j = 0; j < n && v.pass; ++j) {
        const auto& b = family.angular(i, j);
        bool zero_noted = false;
        for (double th : thetas) {
          const double c = std::cos(th);
          const double val = b(c);
          const double der = std::abs(b.derivative(c));
          std::ostringstream msg;
          if (val < 0.0) {
            msg << "b" << pair_name(i, j) << "(cos " << th << ") = " << val << " < 0";
          }
          else if (val > kc.C3 * (1.0 + 1e-12)) {
            msg << "b" << pair_name(i, j) << "(cos " << th << ") = " << val << " > C3 = " << kc.C3;
          }
          else if (der > kc.C4 * (1.0 + 1e-12) + 1e-300) {
            msg << "|b'" << pair_name(i, j) << "(cos " << th << ")| = " << der << " > C4 = " << kc.C4;
          }
          if (!msg.str().empty()) {
            v.pass = false;
            v.detail = msg.str();
            break;
          }
          if (val == 0.0 && !zero_noted) {
            std::ostringstream note;
            note << "b" << pair_name(i, j) << " vanishes at theta = " << th;
            v.notes.push_back(note.str());
            zero_noted = true;
          }
        }
      }
    }
    if (v.pass && !(kc.C_b > 0.0)) {
      v.pass = false;
      std::ostringstream msg;
      msg << "C^b estimate " << kc.C_b << " is not positive";
      v.detail = msg.str();
    }
    if (v.pass) {
      std::ostringstream msg;
      msg << "C3 = " << kc.C3 << ", C4 = " << kc.C4 << ", C^b ~ " << kc.C_b << " (grid estimate)";
      v.detail = msg.str();
    }
    v.notes.push_back("the bound on b' is audited but no downstream constant uses C4");
    report.verdicts.push_back(v);
  }

  // A5: b even (structural plus pointwise), Phi' locally integrable and bounded at infinity.
  {
    AssumptionVerdict v{"A5", true, "b_ij even; Phi_ij' = C gamma r^(gamma-1) integrable near 0 and bounded at infinity", {}};
    for (int i = 0; i < n && v.pass; ++i) {
      for (int j = 0; j < n && v.pass; ++j) {
        const auto& b = family.angular(i, j);
        if (!b.is_even()) {
          v.pass = false;
          v.detail = "b" + pair_name(i, j) + " has odd powers of cos(theta)";
          break;
        }
        for (double c : cosines) {
          if (b(c) != b(-c)) {
            std::ostringstream msg;
            msg << "b" << pair_name(i, j) << "(" << c << ") != b(" << -c << ")";
            v.pass = false;
            v.detail = msg.str();
            break;
          }
        }
      }
    }
    report.verdicts.push_back(v);
  }

  // A6: B_ij <= beta B_ii.
  {
    AssumptionVerdict v{"A6", true, "", {}};
    double beta = 0.0;
    std::string witness;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const auto& pij = family.kinetic(i, j);
        const auto& pii = family.kinetic(i, i);
        if (pij.gamma != pii.gamma && witness.empty()) {
          const double r = pij.gamma < pii.gamma ? radii.front() : radii.back();
          std::ostringstream msg;
          msg << "Phi" << pair_name(i, j) << " / Phi" << pair_name(i, i) << " = r^("
              << pij.gamma - pii.gamma << ") is unbounded; ratio " << pij(r) / pii(r) << " at r = " << r;
          witness = msg.str();
        }
        for (double th : thetas) {
          const double c = std::cos(th);
          const double bij = family.angular(i, j)(c);
          const double bii = family.angular(i, i)(c);
          if (bij == 0.0) {
            continue;
          }
          if (bii == 0.0) {
            if (witness.empty()) {
              std::ostringstream msg;
              msg << "b" << pair_name(i, i) << " vanishes at theta = " << th << " where b"
                  << pair_name(i, j) << " = " << bij;
              witness = msg.str();
            }
            continue;
          }
          for (double r : {radii.front(), 1.0, radii.back()}) {
            beta = std::max(beta, (pij(r) * bij) / (pii(r) * bii));
          }
        }
      }
    }
    kc.beta_eff = beta;
    if (!witness.empty()) {
      v.pass = false;
      v.detail = witness;
    }
    else if (family.beta && beta > *family.beta * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "sampled ratio " << beta << " exceeds beta = " << *family.beta;
      v.pass = false;
      v.detail = msg.str();
    }
    else {
      std::ostringstream msg;
      msg << "beta_eff = " << beta;
      v.detail = msg.str();
    }
    report.verdicts.push_back(v);
  }

  kc.ell_b = compute_ell_b(family);
  return report;
}

}  // namespace kgap
