#include "capmat/ratefit.hpp"

#include <cmath>

#include "capmat/error.hpp"

namespace capmat {

std::string toString(RateClass c) {
  switch (c) {
    case RateClass::Algebraic: return "algebraic";
    case RateClass::Exponential: return "exponential";
    case RateClass::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

LineFit fitLine(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorKind::LengthMismatch, "fit abscissae and ordinates differ in length");
  require(x.size() >= 2, ErrorKind::InsufficientData, "a line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  require(sxx > 0.0, ErrorKind::InsufficientData, "fit abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - (f.intercept + f.slope * x[k]);
    sse += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

RateFit fitRate(const std::vector<double>& r, const std::vector<double>& error, const RateFitOptions& options) {
  require(r.size() == error.size(), ErrorKind::LengthMismatch, "rate fit inputs differ in length");
  require(r.size() >= 4, ErrorKind::InsufficientData, "a rate fit needs at least four points");
  for (std::size_t k = 0; k < r.size(); ++k) {
    require(error[k] > 0.0 && std::isfinite(error[k]), ErrorKind::InsufficientData,
            "rate fit errors must be positive and finite");
    require(r[k] > 0.0 && std::isfinite(r[k]), ErrorKind::InsufficientData, "rate fit radii must be positive");
  }
  std::size_t used = r.size();
  while (used > 0 && error[used - 1] <= 10.0 * options.noiseFloor) --used;

  RateFit fit;
  fit.pointsUsed = used;
  fit.pointsExcluded = r.size() - used;
  if (used < 4) return fit;

  std::vector<double> lr(used), le(used), rr(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(used));
  for (std::size_t k = 0; k < used; ++k) {
    lr[k] = std::log(r[k]);
    le[k] = std::log(error[k]);
  }
  const LineFit alg = fitLine(lr, le);
  const LineFit ex = fitLine(rr, le);
  fit.exponent = -alg.slope;
  fit.algebraicIntercept = alg.intercept;
  fit.algebraicR2 = alg.r2;
  fit.rate = -ex.slope;
  fit.exponentialIntercept = ex.intercept;
  fit.exponentialR2 = ex.r2;
  fit.marginMet = std::abs(alg.r2 - ex.r2) > options.margin;
  if (fit.marginMet || !options.allowInconclusive)
    fit.classification = alg.r2 >= ex.r2 ? RateClass::Algebraic : RateClass::Exponential;
  return fit;
}

}  // namespace capmat
