#pragma once

#include <string>
#include <vector>

namespace capmat {

enum class RateClass { Algebraic, Exponential, Inconclusive };

std::string toString(RateClass c);

struct RateFitOptions {
  /// Required R^2 advantage of the winning model.
  double margin = 0.05;
  /// Trailing points with error <= 10 * noiseFloor are dropped before fitting.
  double noiseFloor = 0.0;
  /// When false the better model is reported even if the margin is not met.
  bool allowInconclusive = true;
};

/// Least-squares fits of error(r) ~ A r^{-p} (log-log) and error(r) ~ A e^{-c r} (semi-log).
struct RateFit {
  double exponent = 0.0;  // p
  double algebraicIntercept = 0.0;
  double algebraicR2 = 0.0;
  double rate = 0.0;  // c
  double exponentialIntercept = 0.0;
  double exponentialR2 = 0.0;
  RateClass classification = RateClass::Inconclusive;
  bool marginMet = false;
  std::size_t pointsUsed = 0;
  std::size_t pointsExcluded = 0;
};

/// Throws InsufficientData for fewer than four points or non-positive errors.
RateFit fitRate(const std::vector<double>& r, const std::vector<double>& error,
                const RateFitOptions& options = {});

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fitLine(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace capmat
