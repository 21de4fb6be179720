#pragma once

#include <span>
#include <vector>

#include "capmat/geometry.hpp"

namespace capmat {

// Real orthonormal spherical harmonics, flattened as index l*l + l + m, m = -l..l.
// m > 0 carries cos(m phi), m < 0 carries sin(|m| phi); no Condon-Shortley phase.

constexpr int harmonicCount(int degree) noexcept { return (degree + 1) * (degree + 1); }
constexpr int harmonicIndex(int l, int m) noexcept { return l * l + l + m; }
constexpr int harmonicDegree(int index) noexcept {
  int l = 0;
  while ((l + 1) * (l + 1) <= index) ++l;
  return l;
}

/// Y_lm(dir) for all l <= degree; `dir` need not be normalized but must be nonzero.
void realSphericalHarmonics(int degree, const Vec3& dir, std::span<double> out);

/// |x|^l Y_lm(x / |x|), polynomial in x (well defined at the origin).
void regularSolidHarmonics(int degree, const Vec3& x, std::span<double> out);

/// Y_lm(x / |x|) / |x|^(l+1); x must be nonzero.
void irregularSolidHarmonics(int degree, const Vec3& x, std::span<double> out);

struct QuadratureRule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule1D gaussLegendre(int n);

/// Product rule on the unit sphere, Gauss-Legendre in cos(theta) and 2n equispaced phi.
/// Integrates polynomials of degree <= exactDegree exactly. Weights sum to 4 pi.
struct SphereRule {
  std::vector<Vec3> directions;
  std::vector<double> weights;
  int exactDegree = 0;

  std::size_t size() const noexcept { return directions.size(); }
};

SphereRule sphereRule(int nTheta);

/// Smallest product rule exact for degree `degree`.
SphereRule sphereRuleForDegree(int degree);

}  // namespace capmat
