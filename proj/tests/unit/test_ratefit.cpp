#include <gtest/gtest.h>

#include <cmath>

#include "capmat/error.hpp"
#include "capmat/ratefit.hpp"

using namespace capmat;

namespace {
std::vector<double> ladder() { return {4, 8, 16, 32, 64}; }
}  // namespace

TEST(RateFit, ExactPowerLaw) {
  std::vector<double> r = ladder(), e;
  for (double x : r) e.push_back(7.0 * std::pow(x, -2.0));
  const RateFit f = fitRate(r, e);
  EXPECT_EQ(f.classification, RateClass::Algebraic);
  EXPECT_TRUE(f.marginMet);
  EXPECT_NEAR(f.exponent, 2.0, 0.01);
  EXPECT_NEAR(f.algebraicR2, 1.0, 1e-12);
}

TEST(RateFit, ExactExponential) {
  std::vector<double> r{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, e;
  for (double x : r) e.push_back(std::exp(-3.0 * x));
  const RateFit f = fitRate(r, e);
  EXPECT_EQ(f.classification, RateClass::Exponential);
  EXPECT_NEAR(f.rate, 3.0, 0.01);
}

TEST(RateFit, NoiseFloorGivesInconclusive) {
  std::vector<double> r{1e3, 1e4, 1e5, 1e6, 1e7}, e;
  for (double x : r) e.push_back(std::pow(x, -2.0) + 1e-12);
  // the last two points sit on the floor, which leaves too few points to classify
  RateFitOptions o;
  o.noiseFloor = 1e-12;
  const RateFit f = fitRate(r, e, o);
  EXPECT_EQ(f.classification, RateClass::Inconclusive);
  EXPECT_EQ(f.pointsExcluded, 2u);
}

TEST(RateFit, SmallMarginIsInconclusive) {
  // a short ladder of a slow algebraic decay looks nearly linear on both axes
  std::vector<double> r{10, 11, 12, 13}, e;
  for (double x : r) e.push_back(std::pow(x, -1.0));
  const RateFit f = fitRate(r, e);
  EXPECT_FALSE(f.marginMet);
  EXPECT_EQ(f.classification, RateClass::Inconclusive);
  RateFitOptions forced;
  forced.allowInconclusive = false;
  EXPECT_EQ(fitRate(r, e, forced).classification, RateClass::Algebraic);
}

TEST(RateFit, RejectsBadInput) {
  EXPECT_THROW(fitRate({1, 2, 3}, {1, 0.5, 0.2}), Error);
  try {
    fitRate({1, 2, 3, 4}, {1, 0.5, 0.0, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(RateFit, LineFit) {
  const LineFit f = fitLine({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
}
