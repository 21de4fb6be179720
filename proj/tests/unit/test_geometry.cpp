#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "capmat/error.hpp"
#include "capmat/geometry.hpp"

using namespace capmat;

namespace {

constexpr double kPi = std::numbers::pi;

Lattice randomLattice(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    std::vector<Vec3> g;
    for (int k = 0; k < d; ++k) {
      Vec3 v = Vec3::Unit(k) * 2.0;
      for (int c = 0; c < 3; ++c) v[c] += 0.6 * u(rng);
      g.push_back(v);
    }
    try {
      return Lattice(d, g);
    } catch (const Error&) {
    }
  }
}

}  // namespace

TEST(Lattice, ChainDual) {
  const Lattice l = Lattice::chain(3.0);
  const BrillouinZone bz = dualBasis(l);
  EXPECT_NEAR(bz.duals[0].x(), 2 * kPi / 3.0, 1e-15);
  EXPECT_NEAR(bz.volume, 2 * kPi / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(l.cellMeasure(), 3.0);
}

TEST(Lattice, SquareDual) {
  const BrillouinZone bz = dualBasis(Lattice::square(1.0));
  EXPECT_NEAR((bz.duals[0] - Vec3(2 * kPi, 0, 0)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((bz.duals[1] - Vec3(0, 2 * kPi, 0)).norm(), 0.0, 1e-14);
  EXPECT_NEAR(bz.volume, 4 * kPi * kPi, 1e-12);
}

TEST(Lattice, GeneralCubicDualMatchesInverseTranspose) {
  Eigen::Matrix3d a;
  a << 1.0, 0.2, -0.1, 0.3, 1.4, 0.25, -0.2, 0.1, 0.9;
  const Lattice l(3, {a.col(0), a.col(1), a.col(2)});
  const BrillouinZone bz = dualBasis(l);
  const Eigen::Matrix3d expected = 2 * kPi * a.inverse().transpose();
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT((bz.duals[i] - expected.col(i)).norm(), 1e-12);
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(bz.duals[i].dot(l.generator(j)), i == j ? 2 * kPi : 0.0, 1e-12);
  }
  EXPECT_NEAR(bz.volume, std::pow(2 * kPi, 3) / std::abs(a.determinant()), 1e-9);
}

TEST(Lattice, RandomBiorthogonality) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const Lattice l = randomLattice(rng, d);
    const BrillouinZone bz = dualBasis(l);
    for (int i = 0; i < d; ++i) {
      EXPECT_LT(l.perpendicularPart(bz.duals[i]).norm(), 1e-12 * bz.duals[i].norm());
      for (int j = 0; j < d; ++j)
        EXPECT_NEAR(bz.duals[i].dot(l.generator(j)), i == j ? 2 * kPi : 0.0, 1e-12 * 2 * kPi);
    }
    // the duals of the duals are the generators again
    const Lattice dual(d, std::vector<Vec3>(bz.duals.begin(), bz.duals.begin() + d));
    const BrillouinZone back = dualBasis(dual);
    for (int i = 0; i < d; ++i)
      EXPECT_LT((back.duals[i] - l.generator(i)).norm(), 1e-10 * l.generator(i).norm());
  }
}

TEST(Lattice, DegenerateGenerators) {
  try {
    Lattice(2, {Vec3(1, 0, 0), Vec3(2, 1e-9, 0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateLattice);
  }
}

TEST(BrillouinZone, ReduceIsIdempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const Lattice l = randomLattice(rng, 3);
  const BrillouinZone bz = dualBasis(l);
  for (int k = 0; k < 100; ++k) {
    Vec3 alpha(u(rng), u(rng), u(rng));
    alpha = l.parallelPart(alpha);
    const Vec3 r = bz.reduce(alpha);
    EXPECT_LT((bz.reduce(r) - r).norm(), 1e-12);
    const auto s = bz.fractional(r);
    for (int i = 0; i < 3; ++i) {
      EXPECT_GE(s[i], -0.5 - 1e-12);
      EXPECT_LT(s[i], 0.5 + 1e-12);
    }
    // differs from alpha by a dual lattice vector
    const auto diff = bz.fractional(alpha - r);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(diff[i], std::round(diff[i]), 1e-10);
  }
}

TEST(LatticePoints, SmallExamples) {
  const TruncationIndex a = latticePoints(Lattice::chain(1.0), 2.5);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a.points.front()[0], -2);
  EXPECT_EQ(a.points.back()[0], 2);
  EXPECT_EQ(latticePoints(Lattice::square(1.0), 1.5).size(), 9u);
}

TEST(LatticePoints, CubicMatchesBruteForce) {
  const TruncationIndex idx = latticePoints(Lattice::cubic(1.0), 10.0);
  std::size_t count = 0;
  for (int i = -11; i <= 11; ++i)
    for (int j = -11; j <= 11; ++j)
      for (int k = -11; k <= 11; ++k)
        if (i * i + j * j + k * k < 100) ++count;
  EXPECT_EQ(idx.size(), count);
  EXPECT_TRUE(std::is_sorted(idx.points.begin(), idx.points.end()));
}

TEST(LatticePoints, StrictBoundaryAndMonotone) {
  const Lattice l = Lattice::square(3.0);
  // (3, 4) * 3 has length exactly 15
  const TruncationIndex a = latticePoints(l, 15.0);
  EXPECT_FALSE(a.find({3, 4, 0}).has_value());
  EXPECT_TRUE(a.find({3, 3, 0}).has_value());
  std::mt19937_64 rng(11);
  const Lattice g = randomLattice(rng, 2);
  const TruncationIndex small = latticePoints(g, 4.0);
  const TruncationIndex big = latticePoints(g, 7.0);
  for (const auto& m : small.points) EXPECT_TRUE(big.find(m).has_value());
}

TEST(LatticePoints, ShiftedCentre) {
  const Lattice l = Lattice::chain(1.0);
  const TruncationIndex idx = latticePoints(l, 3.0, Vec3(-0.5, 0, 0));
  ASSERT_EQ(idx.size(), 6u);
  EXPECT_EQ(idx.points.front()[0], -3);
  EXPECT_EQ(idx.points.back()[0], 2);
}

TEST(FiniteStructure, Placement) {
  UnitCell single{{Sphere{Vec3::Zero(), 1.0}}};
  const Lattice chain = Lattice::chain(3.0);
  const FiniteStructure s = buildFiniteStructure(single, chain, latticePoints(chain, 2.5 * 3.0));
  ASSERT_EQ(s.size(), 5u);
  EXPECT_NEAR(s.front().sphere.center.x(), -6.0, 1e-15);

  UnitCell dimer{{Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(2.5, 0, 0), 1.0}}};
  const Lattice wide = Lattice::chain(7.0);
  const FiniteStructure d = buildFiniteStructure(dimer, wide, latticePoints(wide, 1.5 * 7.0));
  ASSERT_EQ(d.size(), 6u);
  EXPECT_EQ(d[1].resonator, 1);
  EXPECT_EQ(d[2].cell[0], 0);

  const Lattice cubic = Lattice::cubic(3.0);
  const FiniteStructure c = buildFiniteStructure(single, cubic, latticePoints(cubic, 3.5 * 3.0));
  EXPECT_EQ(c.size(), latticePoints(Lattice::cubic(1.0), 3.5).size());
}

TEST(FiniteStructure, OverlapDetected) {
  UnitCell big{{Sphere{Vec3::Zero(), 1.6}}};
  try {
    validateCell(big, Lattice::chain(3.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OverlapDetected);
  }
  UnitCell pair{{Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(1.3, 0, 0), 0.4}}};
  EXPECT_THROW(validateCell(pair, Lattice::chain(3.0)), Error);
}

TEST(Mesh, Icosahedron) {
  const SurfaceMesh m = meshSphere(Sphere{Vec3::Zero(), 1.0}, 0);
  EXPECT_EQ(m.panelCount(), 20u);
  EXPECT_EQ(m.vertices.size(), 12u);
}

TEST(Mesh, Watertight) {
  for (int level = 0; level <= 3; ++level) {
    const SurfaceMesh m = meshSphere(Sphere{Vec3(1, 2, 3), 1.5}, level);
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles)
      for (int e = 0; e < 3; ++e) edges[std::minmax(t[e], t[(e + 1) % 3])]++;
    for (const auto& [edge, count] : edges) EXPECT_EQ(count, 2);
    for (std::size_t p = 0; p < m.panelCount(); ++p)
      EXPECT_GT(m.normals[p].dot(m.centroids[p] - m.sphere.center), 0.0);
    const double exact = 4 * kPi * 1.5 * 1.5;
    EXPECT_LT(std::abs(m.totalArea() - exact) / exact, 10.0 * std::pow(4.0, -level));
  }
}

TEST(Mesh, Level3Area) {
  const SurfaceMesh m = meshSphere(Sphere{Vec3::Zero(), 1.0}, 3);
  EXPECT_EQ(m.panelCount(), 1280u);
  EXPECT_LT(std::abs(m.totalArea() - 4 * kPi) / (4 * kPi), 2e-3);
}

TEST(Mesh, VerticesOnSphere) {
  const SurfaceMesh m = meshSphere(Sphere{Vec3(0.5, -1, 2), 2.0}, 1);
  for (const auto& v : m.vertices) EXPECT_NEAR((v - m.sphere.center).norm(), 2.0, 1e-14);
}

TEST(Mesh, FlatAreaConvergesLikeFourToMinusLevel) {
  double prev = 0.0;
  for (int level = 1; level <= 5; ++level) {
    const SurfaceMesh m = meshSphere(Sphere{}, level);
    double flat = 0.0;
    for (double a : m.flatAreas) flat += a;
    const double err = std::abs(flat - 4 * kPi);
    if (level > 1) EXPECT_NEAR(prev / err, 4.0, 0.3);
    prev = err;
  }
}

TEST(Mesh, LevelTooLarge) {
  try {
    meshSphere(Sphere{}, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LevelTooLarge);
  }
}
