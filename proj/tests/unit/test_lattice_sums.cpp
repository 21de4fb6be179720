#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "capmat/error.hpp"
#include "capmat/lattice_sums.hpp"
#include "unit/oracles.hpp"

using namespace capmat;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<Vec3> testPoints(int d, double a, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  std::vector<Vec3> pts;
  for (int n = 0; n < count; ++n) {
    Vec3 x(u(rng), u(rng), u(rng));
    x *= a;
    if (x.norm() < 0.1 * a) x.x() += 0.2 * a;
    pts.push_back(x);
  }
  (void)d;
  return pts;
}
}  // namespace

TEST(Special, Erfcx) {
  for (double x : {0.0, 0.5, 3.0, 10.0, 25.0})
    EXPECT_NEAR(erfcx(x), std::exp(x * x) * std::erfc(x), 1e-14 * erfcx(x));
  // reference values from an independent erfcx implementation
  EXPECT_NEAR(erfcx(30.0) * 30.0 * std::sqrt(kPi), 0.9994453678083065, 1e-14);
  EXPECT_NEAR(erfcx(25.9999999), 0.021683584933838394, 1e-15);
  EXPECT_NEAR(erfcx(26.0000001), 0.021683584767287423, 1e-15);
}

TEST(Special, Clausen) {
  // Cl2(pi/2) is Catalan's constant; Cl2(pi/3) = 1.0149416064096536...
  EXPECT_NEAR(clausen2(kPi / 2), 0.915965594177219015, 1e-14);
  EXPECT_NEAR(clausen2(kPi / 3), 1.01494160640965362502, 1e-14);
  EXPECT_NEAR(clausen2(-kPi / 3), -1.01494160640965362502, 1e-14);
  EXPECT_NEAR(clausen2(2 * kPi - 0.3), -clausen2(0.3), 1e-14);
  double direct = 0.0;
  for (int k = 1; k < 2000000; ++k) direct += std::sin(k * 2.0) / (double(k) * k);
  EXPECT_NEAR(clausen2(2.0), direct, 1e-9);
}

TEST(LatticeSums, ChainAgainstCubeOracle) {
  // alternating phases: the half-weighted partial sums converge quickly
  const Lattice chain = Lattice::chain(1.0);
  const Vec3 alpha(kPi, 0, 0);
  const LatticeSumScheme ewald;
  const QuasiPeriodicGreens g(chain, alpha, ewald);
  const cdouble ref = oracle::latticeSumCube(1, 1.0, Vec3(0.3, 0.2, 0), alpha, 1000000);
  EXPECT_LT(std::abs(g(Vec3(0.3, 0.2, 0)) - ref), 1e-8);
  for (const Vec3& x : testPoints(1, 1.0, 10, 1)) {
    const cdouble r = oracle::latticeSumCube(1, 1.0, x, alpha, 200000);
    EXPECT_LT(std::abs(g(x) - r), 1e-8) << x.transpose();
  }
}

TEST(LatticeSums, SquareAgainstCubeOracle) {
  const double a = 3.0;
  const Lattice sq = Lattice::square(a);
  const Vec3 alpha(kPi / a, kPi / a, 0);
  const QuasiPeriodicGreens g(sq, alpha, LatticeSumScheme{});
  for (const Vec3& x : testPoints(2, a, 10, 2)) {
    const cdouble r = oracle::latticeSumCube(2, a, x, alpha, 400);
    EXPECT_LT(std::abs(g(x) - r), 1e-8) << x.transpose();
  }
}

TEST(LatticeSums, CubicAgainstCubeOracle) {
  const double a = 3.0;
  const Lattice cu = Lattice::cubic(a);
  const Vec3 alpha(kPi / a, kPi / a, kPi / a);
  const QuasiPeriodicGreens g(cu, alpha, LatticeSumScheme{});
  for (const Vec3& x : testPoints(3, a, 10, 3)) {
    const cdouble r = oracle::latticeSumCube(3, a, x, alpha, 40);
    EXPECT_LT(std::abs(g(x) - r), 1e-8) << x.transpose();
  }
}

TEST(LatticeSums, KummerMatchesEwald) {
  const Lattice chain = Lattice::chain(3.0);
  LatticeSumScheme k;
  k.method = SumMethod::Kummer;
  k.tolerance = 1e-10;
  for (double a : {0.05, 0.7, 1.9}) {
    const Vec3 alpha(a, 0, 0);
    const QuasiPeriodicGreens ge(chain, alpha, LatticeSumScheme{});
    const QuasiPeriodicGreens gk(chain, alpha, k);
    for (const Vec3& x : {Vec3(0.4, 0.3, -0.2), Vec3(-1.2, 0.0, 0.9), Vec3(0.1, 2.5, 0.0)}) {
      EXPECT_LT(std::abs(ge(x) - gk(x)), 1e-9) << a << " " << x.transpose();
      EXPECT_LT(std::abs(ge.regular(x) - gk.regular(x)), 1e-9);
    }
  }
}

TEST(LatticeSums, SplittingIndependence) {
  for (int d = 1; d <= 3; ++d) {
    const Lattice l = Lattice::axisAligned(d, 3.0);
    const Vec3 alpha = Vec3(0.4, -0.7, 0.3).head(3);
    LatticeSumScheme a;
    LatticeSumScheme b;
    b.splitting = 2.0 * std::sqrt(kPi) / 3.0;
    const QuasiPeriodicGreens ga(l, alpha, a);
    const QuasiPeriodicGreens gb(l, alpha, b);
    for (const Vec3& x : testPoints(d, 3.0, 10, 10 + d)) {
      EXPECT_LT(std::abs(ga(x) - gb(x)), 1e-11) << d << " " << x.transpose();
      EXPECT_LT(std::abs(ga.regular(x) - gb.regular(x)), 1e-11);
    }
  }
}

TEST(LatticeSums, Symmetries) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int d = 1; d <= 3; ++d) {
    const Lattice l = Lattice::axisAligned(d, 3.0);
    const BrillouinZone bz = dualBasis(l);
    for (int trial = 0; trial < 5; ++trial) {
      const Vec3 alpha = l.parallelPart(Vec3(u(rng), u(rng), u(rng)));
      const Vec3 x(3 * u(rng), 3 * u(rng), 3 * u(rng));
      const cdouble g = quasiGreens(l, x, alpha, {});
      const cdouble gq = quasiGreens(l, x, alpha + bz.dualPoint({1, -2, 1}), {});
      const cdouble gm = quasiGreens(l, x, -alpha, {});
      EXPECT_LT(std::abs(g - gq), 1e-12);
      EXPECT_LT(std::abs(gm - std::conj(g)), 1e-12);
      // quasi-periodicity in x
      const Vec3 shift = l.position({1, d > 1 ? -1 : 0, d > 2 ? 2 : 0});
      const cdouble gs = quasiGreens(l, x + shift, alpha, {});
      EXPECT_LT(std::abs(gs - std::polar(1.0, alpha.dot(shift)) * g), 1e-12);
    }
  }
}

TEST(LatticeSums, RegularPartNearOrigin) {
  const Lattice l = Lattice::cubic(3.0);
  const QuasiPeriodicGreens g(l, Vec3(0.3, 0.2, 0.1), {});
  const Vec3 x(1e-4, 2e-4, -1e-4);
  EXPECT_LT(std::abs(g.regular(x) - (g(x) - 1.0 / (4 * kPi * x.norm()))), 1e-9);
  EXPECT_TRUE(std::isfinite(std::abs(g.regular(Vec3::Zero()))));
}

TEST(LatticeSums, GammaAndCutoffErrors) {
  const Lattice l = Lattice::square(3.0);
  try {
    QuasiPeriodicGreens(l, Vec3::Zero(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GammaPointRequested);
  }
  EXPECT_THROW(QuasiPeriodicGreens(l, dualBasis(l).dualPoint({1, 0, 0}), {}), Error);
  LatticeSumScheme tight;
  tight.spatialCutoff = 0.3;
  try {
    QuasiPeriodicGreens(l, Vec3(0.2, 0.1, 0), tight);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CutoffInsufficient);
  }
}

TEST(LatticeSums, OffPlaneBranchesAgree) {
  // the unscreened spectral form takes over away from the lattice; both must agree across the switch
  for (int d = 1; d <= 2; ++d) {
    const Lattice l = Lattice::axisAligned(d, 3.0);
    const Vec3 alpha = l.parallelPart(Vec3(kPi / 3.0, kPi / 3.0, 0));
    const QuasiPeriodicGreens g(l, alpha, {});
    const Vec3 perp = l.frame(2);
    const Vec3 along = l.frame(0);
    for (double h : {2.9, 3.1, 5.0}) {
      const Vec3 x = 0.7 * along + h * perp;
      const cdouble r = oracle::latticeSumCube(d, 3.0, x, alpha, d == 1 ? 400000 : 600);
      EXPECT_LT(std::abs(g(x) - r), 1e-8) << d << " " << h;
    }
  }
}
