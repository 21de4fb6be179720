#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "capmat/harmonics.hpp"

using namespace capmat;

TEST(GaussLegendre, IntegratesPolynomials) {
  for (int n = 1; n <= 20; ++n) {
    const auto rule = gaussLegendre(n);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], p);
      const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
      EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " p=" << p;
    }
  }
}

TEST(SphericalHarmonics, Orthonormal) {
  const int L = 8;
  const auto rule = sphereRuleForDegree(2 * L);
  const int n = harmonicCount(L);
  std::vector<double> gram(static_cast<std::size_t>(n * n), 0.0);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < rule.size(); ++p) {
    realSphericalHarmonics(L, rule.directions[p], y);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) gram[a * n + b] += rule.weights[p] * y[a] * y[b];
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) EXPECT_NEAR(gram[a * n + b], a == b ? 1.0 : 0.0, 1e-13);
}

TEST(SphericalHarmonics, KnownValues) {
  std::vector<double> y(9);
  const Vec3 d(0.3, -0.4, 0.5);
  realSphericalHarmonics(2, d, y);
  const Vec3 u = d.normalized();
  const double c1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));
  EXPECT_NEAR(y[harmonicIndex(1, 0)], c1 * u.z(), 1e-15);
  EXPECT_NEAR(y[harmonicIndex(1, 1)], c1 * u.x(), 1e-15);
  EXPECT_NEAR(y[harmonicIndex(1, -1)], c1 * u.y(), 1e-15);
  const double c2 = std::sqrt(5.0 / (16.0 * std::numbers::pi));
  EXPECT_NEAR(y[harmonicIndex(2, 0)], c2 * (3 * u.z() * u.z() - 1), 1e-15);
}

TEST(SolidHarmonics, AdditionTheorem) {
  // 1/|x - y| = sum 4 pi / (2l + 1) R_lm(y) I_lm(x) for |y| < |x|
  const int L = 40;
  const Vec3 x(1.0, 2.0, -0.5);
  const Vec3 y(0.2, -0.3, 0.25);
  std::vector<double> r(static_cast<std::size_t>(harmonicCount(L)));
  std::vector<double> s(r.size());
  regularSolidHarmonics(L, y, r);
  irregularSolidHarmonics(L, x, s);
  double sum = 0.0;
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m)
      sum += 4 * std::numbers::pi / (2 * l + 1) * r[harmonicIndex(l, m)] * s[harmonicIndex(l, m)];
  EXPECT_NEAR(sum, 1.0 / (x - y).norm(), 1e-14);
}

TEST(SolidHarmonics, RegularAtOriginAndPoles) {
  std::vector<double> r(16);
  regularSolidHarmonics(3, Vec3::Zero(), r);
  EXPECT_NEAR(r[0], 1.0 / std::sqrt(4 * std::numbers::pi), 1e-15);
  for (int k = 1; k < 16; ++k) EXPECT_EQ(r[k], 0.0);
  realSphericalHarmonics(3, Vec3(0, 0, -2), r);
  EXPECT_NEAR(r[harmonicIndex(1, 0)], -std::sqrt(3.0 / (4 * std::numbers::pi)), 1e-15);
  EXPECT_NEAR(r[harmonicIndex(2, 1)], 0.0, 1e-15);
}
