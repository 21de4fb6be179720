#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "capmat/error.hpp"
#include "capmat/harmonics.hpp"
#include "capmat/panel_integrals.hpp"
#include "capmat/singlelayer.hpp"
#include "unit/oracles.hpp"

using namespace capmat;

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;

// Midpoint rule on a uniformly subdivided triangle.
double bruteTriangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p, int n) {
  const double area = 0.5 * (b - a).cross(c - a).norm() / (n * n);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; i + j < n; ++j) {
      const Vec3 q = a + (b - a) * ((i + 1.0 / 3) / n) + (c - a) * ((j + 1.0 / 3) / n);
      s += area / (p - q).norm();
      if (i + j < n - 1) {
        const Vec3 q2 = a + (b - a) * ((i + 2.0 / 3) / n) + (c - a) * ((j + 2.0 / 3) / n);
        s += area / (p - q2).norm();
      }
    }
  return s;
}
}  // namespace

TEST(TrianglePotential, MatchesFineQuadrature) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0.3, 0.8, 0);
  for (const Vec3& p : {Vec3(0.3, 0.3, 0.5), Vec3(2.0, -1.0, 0.1), Vec3(-0.5, 1.5, 0.0),
                        Vec3(0.3, 0.3, -0.05)}) {
    EXPECT_NEAR(trianglePotential(a, b, c, p), bruteTriangle(a, b, c, p, 400), 2e-4);
  }
}

TEST(TrianglePotential, CentroidSelfTerm) {
  // equilateral triangle with unit side: potential at the centroid is sqrt(3) ln(2 + sqrt(3))
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0.5, std::sqrt(3.0) / 2, 0);
  const Vec3 g = (a + b + c) / 3.0;
  EXPECT_NEAR(trianglePotential(a, b, c, g), std::sqrt(3.0) * std::log(2 + std::sqrt(3.0)),
              1e-12);
}

TEST(SingleLayer, MultipoleSingleSphere) {
  const auto op = assembleSingleLayer(std::vector<Sphere>{Sphere{Vec3::Zero(), 1.0}}, Backend::multipole(0));
  ASSERT_EQ(op.op.rows(), 1);
  EXPECT_DOUBLE_EQ(op.op(0, 0), 1.0);
  const auto dens = solveDensities(op, {0});
  EXPECT_NEAR(dens[0].coefficients(0), 1.0, 1e-15);
  for (int L = 0; L <= 6; ++L) {
    const Eigen::MatrixXd c = capacitanceOf({Sphere{Vec3(1, 2, 3), 2.5}}, Backend::multipole(L));
    EXPECT_NEAR(c(0, 0), kFourPi * 2.5, 1e-10 * kFourPi * 2.5);
  }
}

TEST(SingleLayer, PanelUniformDensityPotential) {
  const auto op = assembleSingleLayer(std::vector<Sphere>{Sphere{Vec3::Zero(), 1.0}}, Backend::panel(3));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(op.op.rows());
  const Eigen::VectorXd v = op.op * ones;
  for (Eigen::Index p = 0; p < v.size(); ++p) EXPECT_NEAR(v(p) / op.loads(p, 0), 1.0, 1e-2);
  const Eigen::MatrixXd c = capacitanceOf(op);
  EXPECT_NEAR(c(0, 0), kFourPi, 1e-2 * kFourPi);
}

TEST(SingleLayer, MonopoleFarField) {
  const auto op = assembleSingleLayer(
      std::vector<Sphere>{Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(10, 0, 0), 1.0}}, Backend::multipole(0));
  EXPECT_NEAR(op.op(0, 1), 0.1, 1e-14);
  const auto dens = solveDensities(op, {1});
  EXPECT_LT(dens[0].coefficients(0), 0.0);
  EXPECT_NEAR(dens[0].coefficients(0), -0.1 / (1 - 0.01), 1e-12);
}

TEST(SingleLayer, BlockMatchesDirectQuadrature) {
  // independent check: R_i R_j^(l+1) / (2l+1) int Y_a(w) I_b(t + R_i w) dw
  const int L = 3;
  const double ri = 0.7, rj = 1.2;
  const Vec3 t(2.1, -0.9, 1.4);
  const auto op = assembleSingleLayer(std::vector<Sphere>{Sphere{t, ri}, Sphere{Vec3::Zero(), rj}},
                                      Backend::multipole(L));
  const int n = harmonicCount(L);
  const auto rule = sphereRule(40);
  std::vector<double> ya(static_cast<std::size_t>(n)), ib(static_cast<std::size_t>(n));
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < rule.size(); ++p) {
    realSphericalHarmonics(L, rule.directions[p], ya);
    irregularSolidHarmonics(L, t + ri * rule.directions[p], ib);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int lb = harmonicDegree(b);
        expected(a, b) += rule.weights[p] * ya[a] * ib[b] * ri * std::pow(rj, lb + 1) / (2 * lb + 1);
      }
  }
  EXPECT_LT((op.op.block(0, n, n, n) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SingleLayer, TwoSpheresMatchImageCharges) {
  const auto ref = oracle::twoSphereImages(1.0, 4.0);
  const Eigen::MatrixXd c =
      capacitanceOf({Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(4, 0, 0), 1.0}}, Backend::multipole(4));
  EXPECT_NEAR(c(0, 0), ref[0], 1e-6 * ref[0]);
  EXPECT_NEAR(c(0, 1), ref[1], 1e-6 * ref[0]);
  EXPECT_NEAR(c(1, 0), ref[1], 1e-6 * ref[0]);
  EXPECT_NEAR(c(1, 1), ref[0], 1e-6 * ref[0]);
  EXPECT_LT(c(0, 1), 0.0);
  EXPECT_GT(c(0, 0), kFourPi);
}

TEST(SingleLayer, DecouplingLimit) {
  const Eigen::MatrixXd c =
      capacitanceOf({Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(1000, 0, 0), 1.0}}, Backend::multipole(2));
  // far-field coupling is -(4 pi R)^2 / (4 pi c)
  EXPECT_NEAR(c(0, 1), -kFourPi / 1000.0, 1e-3 * kFourPi / 1000.0);
  EXPECT_NEAR(c(0, 0), kFourPi, 1e-3);
}

TEST(SingleLayer, PermutationEquivariance) {
  std::vector<Sphere> s{{Vec3(0, 0, 0), 1.0}, {Vec3(3, 0.5, 0), 0.8}, {Vec3(-1, 3, 1), 1.1}};
  const Eigen::MatrixXd c = capacitanceOf(s, Backend::multipole(3));
  std::vector<Sphere> p{s[2], s[0], s[1]};
  const Eigen::MatrixXd cp = capacitanceOf(p, Backend::multipole(3));
  const int perm[3] = {2, 0, 1};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(cp(i, j), c(perm[i], perm[j]), 1e-11);
}

TEST(SingleLayer, BackendsAgree) {
  std::vector<Sphere> s{{Vec3(0, 0, 0), 1.0}, {Vec3(3, 0, 0), 1.0}, {Vec3(1.5, 2.8, 0.4), 0.9}};
  const Eigen::MatrixXd a = capacitanceOf(s, Backend::panel(3));
  const Eigen::MatrixXd b = capacitanceOf(s, Backend::multipole(4));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), b(i, j), 1e-2 * std::abs(b(i, j))) << i << j;
}

TEST(SingleLayer, OverlapAndLimits) {
  try {
    assembleSingleLayer(std::vector<Sphere>{{Vec3::Zero(), 1.0}, {Vec3(1.5, 0, 0), 1.0}},
                        Backend::multipole(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OverlapDetected);
  }
  EXPECT_THROW(assembleSingleLayer(std::vector<Sphere>{{Vec3::Zero(), 1.0}}, Backend::multipole(7)),
               Error);
}
