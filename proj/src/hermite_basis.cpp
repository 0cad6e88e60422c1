#include "kgap/hermite_basis.hpp"

#include <cmath>
#include <stdexcept>

namespace kgap {

void hermite_values(double x, int degree, std::span<double> out)
{
  out[0] = 1.0;
  if (degree >= 1) {
    out[1] = x;
  }
  for (int k = 1; k < degree; ++k) {
    out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
  }
}

std::size_t simplex_size(int degree)
{
  const auto n = static_cast<std::size_t>(degree);
  return (n + 1) * (n + 2) * (n + 3) / 6;
}

HermiteBasis::HermiteBasis(int species, int degree)
    : species_(species)
    , degree_(degree)
{
  if (species < 1) {
    throw std::invalid_argument("HermiteBasis: species count must be >= 1");
  }
  if (degree < 0) {
    throw std::invalid_argument("HermiteBasis: degree must be >= 0");
  }
  const int side = degree + 1;
  lookup_.assign(static_cast<std::size_t>(side * side * side), -1);
  for (int total = 0; total <= degree; ++total) {
    for (int a = total; a >= 0; --a) {
      for (int b = total - a; b >= 0; --b) {
        const int c = total - a - b;
        lookup_[static_cast<std::size_t>((a * side + b) * side + c)] = static_cast<int>(indices_.size());
        indices_.push_back({a, b, c});
      }
    }
  }
}

int HermiteBasis::position(const MultiIndex& a) const
{
  if (a[0] < 0 || a[1] < 0 || a[2] < 0 || a[0] + a[1] + a[2] > degree_) {
    return -1;
  }
  const int side = degree_ + 1;
  return lookup_[static_cast<std::size_t>((a[0] * side + a[1]) * side + a[2])];
}

void HermiteBasis::evaluate(const Vec3& v, std::span<double> out) const
{
  constexpr int max_degree = 64;
  if (degree_ > max_degree) {
    throw std::invalid_argument("HermiteBasis::evaluate: degree too large");
  }
  std::array<std::array<double, max_degree + 1>, 3> h{};
  for (int k = 0; k < 3; ++k) {
    hermite_values(v[static_cast<std::size_t>(k)], degree_, h[static_cast<std::size_t>(k)]);
  }
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    const auto& a = indices_[j];
    out[j] = h[0][static_cast<std::size_t>(a[0])] * h[1][static_cast<std::size_t>(a[1])] *
             h[2][static_cast<std::size_t>(a[2])];
  }
}

}  // namespace kgap
