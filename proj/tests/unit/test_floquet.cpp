#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>

#include "capmat/error.hpp"
#include "capmat/floquet.hpp"
#include "capmat/spectra.hpp"

using namespace capmat;

namespace {
constexpr double kPi = std::numbers::pi;
using cdouble = std::complex<double>;

UnitCell oneSphere() { return UnitCell{{Sphere{Vec3::Zero(), 1.0}}}; }

UnitCell dimerCell() { return UnitCell{{Sphere{Vec3(-0.9, 0, 0), 1.0}, Sphere{Vec3(1.1, 0.3, 0), 0.7}}}; }

QuasiCapacitanceEvaluator chainEvaluator(const UnitCell& cell, double a) {
  return QuasiCapacitanceEvaluator(cell, Lattice::chain(a), Backend::multipole(2), LatticeSumScheme{});
}
}  // namespace

TEST(BZQuadrature, UniformGrid) {
  const Lattice sq = Lattice::square(2.0);
  const BZQuadrature q = BZQuadrature::uniform(sq, 8);
  ASSERT_EQ(q.size(), 64u);
  double sum = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    sum += q.weights[k];
    EXPECT_GT(q.nodes[k].norm(), 0.01);
    EXPECT_LT((q.nodes[q.mirror[k]] + q.nodes[k]).norm(), 1e-14);
  }
  EXPECT_NEAR(sum, 1.0, 1e-14);
  EXPECT_THROW(BZQuadrature::uniform(sq, 7), Error);
  EXPECT_EQ(q.refined(sq).points, 16);
}

TEST(BZQuadrature, GradedResolvesLogarithm) {
  // the mean of log|x| over the cell [-1/2, 1/2] is log(1/2) - 1
  const Lattice chain = Lattice::chain(1.0);
  const BZQuadrature q = BZQuadrature::graded(chain, 16);
  const double dual = 2.0 * kPi;
  double sum = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    sum += q.weights[k];
    mean += q.weights[k] * std::log(std::abs(q.nodes[k].x()) / dual);
    EXPECT_LT((q.nodes[q.mirror[k]] + q.nodes[k]).norm(), 1e-15);
  }
  EXPECT_NEAR(sum, 1.0, 1e-13);
  EXPECT_NEAR(mean, std::log(0.5) - 1.0, 1e-9);
  EXPECT_THROW(BZQuadrature::graded(Lattice::square(1.0), 16), Error);
  EXPECT_EQ(quadratureKindFromString("graded"), QuadratureKind::Graded);
  EXPECT_EQ(toString(QuadratureKind::Uniform), "uniform");
}

TEST(InverseFloquet, ResynthesisOnUniformGrid) {
  const QuasiCapacitanceEvaluator ev = chainEvaluator(dimerCell(), 5.0);
  const Lattice& chain = ev.lattice();
  const BZQuadrature q = BZQuadrature::uniform(chain, 8);
  const QuasiCapacitanceGrid grid = sampleGrid(ev, q);
  std::vector<LatticeIndex> points;
  for (int m = -3; m <= 4; ++m) points.push_back({m, 0, 0});
  const RealSpaceCoefficients c = inverseFloquet(chain, grid, points);
  EXPECT_LT(c.imaginaryResidue, 1e-10);
  for (std::size_t k = 0; k < q.size(); ++k) {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(2, 2);
    for (std::size_t p = 0; p < points.size(); ++p)
      sum += c.matrices[p].cast<cdouble>() * std::exp(cdouble(0, q.nodes[k].x() * chain.generator(0).x() * points[p][0]));
    EXPECT_LT((sum - grid.matrices[k]).norm(), 1e-8 * grid.matrices[k].norm());
  }
}

TEST(InverseFloquet, RealnessAndTransposeSymmetry) {
  const QuasiCapacitanceEvaluator ev = chainEvaluator(dimerCell(), 5.0);
  const BZQuadrature q = BZQuadrature::graded(ev.lattice(), 16);
  const RealSpaceCoefficients c = inverseFloquet(ev.lattice(), sampleGrid(ev, q), {{-2, 0, 0}, {0, 0, 0}, {2, 0, 0}});
  EXPECT_LT(c.imaginaryResidue, 1e-10);
  EXPECT_LT((c.at({-2, 0, 0}) - c.at({2, 0, 0}).transpose()).norm(), 1e-12 * c.at({0, 0, 0}).norm());
  EXPECT_LT((c.at({0, 0, 0}) - c.at({0, 0, 0}).transpose()).norm(), 1e-12 * c.at({0, 0, 0}).norm());
  EXPECT_GT(c.at({0, 0, 0})(0, 0), 0.0);
  EXPECT_LT(c.at({2, 0, 0})(0, 0), 0.0);
  EXPECT_THROW(c.at({5, 0, 0}), Error);
}

TEST(InverseFloquet, ConvergenceCheckAndDecay) {
  const QuasiCapacitanceEvaluator ev = chainEvaluator(oneSphere(), 3.0);
  std::vector<LatticeIndex> points;
  for (int m = 0; m <= 8; ++m) points.push_back({m, 0, 0});
  const RealSpaceCoefficients c = realSpaceCapacitance(ev, points, BZQuadrature::graded(ev.lattice(), 16));
  EXPECT_LT(c.convergenceDelta, 1e-10 * c.at({0, 0, 0})(0, 0));
  EXPECT_EQ(c.quadraturePoints, 32);
  ASSERT_TRUE(c.decay.has_value());
  EXPECT_EQ(c.decay->classification, RateClass::Algebraic);

  FloquetOptions strict;
  strict.tolerance = 1e-12;
  try {
    realSpaceCapacitance(ev, points, BZQuadrature::uniform(ev.lattice(), 4), strict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::QuadratureUnconverged);
  }
}

TEST(InverseFloquet, FiniteDiagonalBoundedByInfinite) {
  // growing the truncation only adds neighbours, which raises the diagonal towards C^0
  const QuasiCapacitanceEvaluator ev = chainEvaluator(oneSphere(), 3.0);
  const RealSpaceCoefficients c =
      realSpaceCapacitance(ev, {{0, 0, 0}}, BZQuadrature::graded(ev.lattice(), 64));
  const double c0 = c.at({0, 0, 0})(0, 0);
  double previous = 0.0;
  for (double r : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    const TruncationIndex idx = latticePoints(ev.lattice(), r * 3.0);
    const CapacitanceBlocks f = finiteCapacitance(oneSphere(), ev.lattice(), idx, Backend::multipole(2));
    const double diag = f.block(*idx.find({0, 0, 0}), *idx.find({0, 0, 0}), 0, 0);
    EXPECT_LE(diag, c0 + 1e-6);
    EXPECT_GE(diag, previous);
    previous = diag;
  }
}

TEST(TruncatedMatrix, BlockConventionAndSymmetry) {
  const QuasiCapacitanceEvaluator ev = chainEvaluator(dimerCell(), 5.0);
  const TruncationIndex idx = latticePoints(ev.lattice(), 2.5 * 5.0);
  const std::vector<LatticeIndex> diffs = differenceSet(idx);
  std::set<int> seen;
  for (const auto& d : diffs) seen.insert(d[0]);
  EXPECT_EQ(seen, (std::set<int>{-4, -3, -2, -1, 0, 1, 2, 3, 4}));
  const RealSpaceCoefficients c = realSpaceCapacitance(ev, diffs, BZQuadrature::graded(ev.lattice(), 16));
  const CapacitanceBlocks t = truncatedMatrix(c, idx, "h");
  EXPECT_EQ(t.provenance, Provenance::TruncatedInfinite);
  EXPECT_TRUE(t.entries.isApprox(t.entries.transpose(), 1e-14));
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const int shift = idx.points[b][0] - idx.points[a][0];
      const Eigen::MatrixXd& expected = c.at({shift, 0, 0});
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(t.block(a, b, i, j), expected(i, j), 1e-14 * expected.norm());
    }
  EXPECT_THROW(truncatedMatrix(c, latticePoints(ev.lattice(), 6.5 * 5.0)), Error);
}

TEST(TruncatedFloquet, SingleSiteIsFlat) {
  const Lattice chain = Lattice::chain(1.0);
  const TruncationIndex idx = latticePoints(chain, 10.5);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
  u(*idx.find({3, 0, 0})) = 1.0;
  const auto t = truncatedFloquetTransform(u, idx, 1, chain, {Vec3(0.3, 0, 0), Vec3(-1.7, 0, 0)});
  for (const auto& v : t) EXPECT_NEAR(std::abs(v(0)), 1.0, 1e-15);
  EXPECT_NEAR(std::arg(t[0](0)), 0.9, 1e-14);
  const BZQuadrature grid = BZQuadrature::uniform(chain, 64);
  EXPECT_TRUE(estimateQuasiperiodicity(u, idx, 1, chain, grid).flat);
  EXPECT_THROW(truncatedFloquetTransform(Eigen::VectorXd::Ones(3), idx, 1, chain, {Vec3(0.3, 0, 0)}), Error);
}

TEST(TruncatedFloquet, BlochVectorPeaksAtItsQuasiperiodicity) {
  const Lattice chain = Lattice::chain(3.0);
  const TruncationIndex idx = latticePoints(chain, 25 * 3.0, Vec3(-1.5, 0, 0));
  ASSERT_EQ(idx.size(), 50u);
  const BZQuadrature grid = BZQuadrature::uniform(chain, 256);
  for (double alpha0 : {0.21, 0.5, 0.83}) {
    Eigen::VectorXd u(50);
    for (std::size_t k = 0; k < 50; ++k) u(static_cast<Eigen::Index>(k)) = std::cos(alpha0 * 3.0 * idx.points[k][0]);
    const QuasiperiodicityEstimate e = estimateQuasiperiodicity(u, idx, 1, chain, grid);
    EXPECT_FALSE(e.flat);
    EXPECT_NEAR(std::abs(e.alpha.x()), alpha0, 2.0 * kPi / 3.0 / 256);
    EXPECT_NEAR(e.mirror.x(), -e.alpha.x(), 1e-15);
  }
}
