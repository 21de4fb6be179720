#include "capmat/lattice_sums.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "capmat/error.hpp"

namespace capmat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInvFourPi = 0.25 / kPi;
constexpr int kSeriesTerms = 40;

double sphereMeasure(int d) { return d == 1 ? 2.0 : (d == 2 ? 2.0 * kPi : 4.0 * kPi); }

// Tail of the screened spatial sum beyond radius R, with one boundary shell counted in full.
double spatialTail(int d, double e, double radius, double cell, double scale) {
  const double term = std::erfc(e * radius) * kInvFourPi / radius;
  const double shell = sphereMeasure(d) * std::pow(radius, d - 1) / cell;
  return term * (shell * (1.0 / (2.0 * e * e * radius) + scale) + 1.0);
}

// Tail of the Gaussian-damped spectral sum beyond |k| = K (terms bounded by exp(-k^2/4E^2) / |Y|).
double spectralTail(int d, double e, double k, double cell, double scale) {
  const double dualDensity = cell / std::pow(2.0 * kPi, d);
  const double term = std::exp(-k * k / (4.0 * e * e)) / cell / std::max(k, 1e-300);
  const double shell = sphereMeasure(d) * std::pow(k, d - 1) * dualDensity;
  return term * (shell * (2.0 * e * e / k + 2.0 * kPi / scale) + 1.0);
}

// Tail of the unscreened spectral sum, terms bounded by exp(-k rho0) / (k |Y|).
double pureSpectralTail(int d, double k, double rho0, double cell, double scale) {
  const double dualDensity = cell / std::pow(2.0 * kPi, d);
  const double term = std::exp(-k * rho0) / cell / std::max(k, 1e-300);
  const double shell = sphereMeasure(d) * std::pow(k, d - 1) * dualDensity;
  return term * (shell * (1.0 / rho0 + 2.0 * kPi / scale) + 1.0);
}

template <class Tail>
double solveRadius(Tail tail, double start, double step, double target) {
  double r = start;
  for (int it = 0; it < 10000 && tail(r) > target; ++it) r += step;
  return r;
}

// -erf(E r) / r, finite at r = 0
double negErfOverR(double e, double r) {
  const double u = e * r;
  if (u < 1e-3) {
    const double u2 = u * u;
    return -2.0 * e / std::sqrt(kPi) * (1.0 - u2 / 3.0 + u2 * u2 / 10.0);
  }
  return -std::erf(u) / r;
}

// e^{kz} erfc(k/2E + E z) written without overflow
double screenedExp(double k, double z, double e) {
  const double a = k / (2.0 * e) + e * z;
  if (a > 0.0) return std::exp(-k * k / (4.0 * e * e) - e * e * z * z) * erfcx(a);
  return std::exp(k * z) * std::erfc(a);
}

}  // namespace

std::string toString(SumMethod m) {
  switch (m) {
    case SumMethod::Ewald: return "ewald";
    case SumMethod::Kummer: return "kummer";
    case SumMethod::DirectPartial: return "directPartial";
  }
  return "ewald";
}

SumMethod sumMethodFromString(const std::string& s) {
  if (s == "ewald" || s == "spectralEwald") return SumMethod::Ewald;
  if (s == "kummer") return SumMethod::Kummer;
  if (s == "directPartial" || s == "direct") return SumMethod::DirectPartial;
  fail(ErrorKind::ConfigInvalid, "unknown lattice-sum method '" + s + "'");
}

std::string LatticeSumScheme::name() const {
  char buf[160];
  if (method == SumMethod::DirectPartial)
    std::snprintf(buf, sizeof buf, "directPartial(M=%d)", directCutoff);
  else if (method == SumMethod::Kummer)
    std::snprintf(buf, sizeof buf, "kummer(tol=%.3g)", tolerance);
  else
    std::snprintf(buf, sizeof buf, "ewald(E=%.6g,tol=%.3g)", splitting, tolerance);
  return buf;
}

double erfcx(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  const double u = 1.0 / (x * x);
  const double series =
      1.0 - 0.5 * u * (1.0 - 1.5 * u * (1.0 - 2.5 * u * (1.0 - 3.5 * u * (1.0 - 4.5 * u * (1.0 - 5.5 * u)))));
  return series / (x * std::sqrt(kPi));
}

double clausen2(double theta) {
  // reduce to (-pi, pi]
  double t = std::fmod(theta, 2.0 * kPi);
  if (t > kPi) t -= 2.0 * kPi;
  if (t <= -kPi) t += 2.0 * kPi;
  if (t == 0.0) return 0.0;
  const double a = std::abs(t);
  double s = a - a * std::log(a);
  const double x2 = (a / (2.0 * kPi)) * (a / (2.0 * kPi));
  double p = a;
  for (int k = 1; k < 60; ++k) {
    p *= x2;
    const double term = std::riemann_zeta(2.0 * k) * p / (k * (2.0 * k + 1.0));
    s += term;
    if (term < 1e-18 * s) break;
  }
  return t < 0 ? -s : s;
}

QuasiPeriodicGreens::QuasiPeriodicGreens(const Lattice& lattice, const Vec3& alpha,
                                         const LatticeSumScheme& scheme)
    : lattice_(lattice), bz_(dualBasis(lattice)), scheme_(scheme) {
  require(alpha.allFinite(), ErrorKind::InvalidArgument, "non-finite quasi-momentum");
  require(scheme.tolerance > 0.0, ErrorKind::InvalidArgument, "lattice-sum tolerance must be positive");
  alpha_ = bz_.reduce(lattice.parallelPart(alpha));
  double dualScale = 0.0;
  for (int k = 0; k < lattice.dimension(); ++k) dualScale = std::max(dualScale, bz_.duals[k].norm());
  require(alpha_.norm() > 1e-12 * dualScale, ErrorKind::GammaPointRequested,
          "quasi-momentum coincides with the zone centre");

  const int d = lattice.dimension();
  const double scale = lattice.scale();
  const double cell = lattice.cellMeasure();
  const double tau = scheme.tolerance;

  if (scheme.method == SumMethod::Kummer) {
    require(d == 1, ErrorKind::InvalidArgument, "Kummer summation is only available for chains");
    errorEstimate_ = tau;
    return;
  }
  if (scheme.method == SumMethod::DirectPartial) {
    require(scheme.directCutoff >= 2, ErrorKind::InvalidArgument, "direct cutoff must be at least 2");
    Vec3 probe = Vec3::Zero();
    for (int k = 0; k < d; ++k) probe += (0.31 - 0.07 * k) * lattice.generator(k);
    probe += 0.13 * scale * lattice.frame(std::min(d, 2));
    LatticeSumScheme half = scheme;
    half.directCutoff = scheme.directCutoff / 2;
    errorEstimate_ = 0.0;
    const cdouble full = direct(probe, false);
    scheme_ = half;
    const cdouble coarse = direct(probe, false);
    scheme_ = scheme;
    errorEstimate_ = std::abs(full - coarse);
    if (errorEstimate_ > tau)
      fail(ErrorKind::CutoffInsufficient, "direct partial sum error estimate " +
                                              std::to_string(errorEstimate_) + " exceeds tolerance");
    return;
  }

  splitting_ = scheme.splitting > 0.0 ? scheme.splitting : std::sqrt(kPi) / scale;
  const double e = splitting_;
  const double budget = tau / 4.0;

  // spatial part
  if (scheme.spatialCutoff > 0.0) {
    spatialRadius_ = scheme.spatialCutoff * scale;
    const double tail = spatialTail(d, e, spatialRadius_, cell, scale);
    if (tail > budget)
      fail(ErrorKind::CutoffInsufficient,
           "spatial cutoff leaves an estimated error of " + std::to_string(tail));
  } else {
    spatialRadius_ = solveRadius([&](double r) { return spatialTail(d, e, r, cell, scale); },
                                 0.5 / e, 0.05 / e, budget);
  }
  errorEstimate_ += spatialTail(d, e, spatialRadius_, cell, scale);
  if (d > 1) {
    double halfDiagonal = 0.0;
    Vec3 corner = Vec3::Zero();
    for (int k = 0; k < d; ++k) corner += lattice.generator(k);
    halfDiagonal = 0.5 * corner.norm();
    for (int k = 0; k < d; ++k)
      for (int j = k + 1; j < d; ++j)
        halfDiagonal = std::max(halfDiagonal, 0.5 * (lattice.generator(k) - lattice.generator(j)).norm());
    const TruncationIndex idx = latticePoints(lattice, spatialRadius_ + halfDiagonal + 1e-9 * scale);
    points_.reserve(idx.size());
    phases_.reserve(idx.size());
    for (const auto& m : idx.points) {
      const Vec3 p = lattice.position(m);
      points_.push_back(p);
      phases_.push_back(std::polar(1.0, alpha_.dot(p)));
    }
  }

  // spectral part
  double kmax;
  if (scheme.spectralCutoff > 0.0) {
    kmax = scheme.spectralCutoff * 2.0 * kPi / scale;
    const double tail = spectralTail(d, e, kmax, cell, scale);
    if (tail > budget)
      fail(ErrorKind::CutoffInsufficient,
           "spectral cutoff leaves an estimated error of " + std::to_string(tail));
  } else {
    kmax = solveRadius([&](double k) { return spectralTail(d, e, k, cell, scale); }, 2.0 * e,
                       0.1 * e, budget);
  }
  errorEstimate_ += spectralTail(d, e, kmax, cell, scale);
  // in d < 3 the unscreened representation takes over at perpendicular distance rho0
  const double rho0 = std::sqrt(kPi) / e;
  double kPure = 0.0;
  if (d < 3) {
    kPure = solveRadius([&](double k) { return pureSpectralTail(d, k, rho0, cell, scale); },
                        1.0 / rho0, 0.1 / rho0, budget);
    errorEstimate_ = std::max(errorEstimate_, pureSpectralTail(d, kPure, rho0, cell, scale));
  }
  // d = 2 screened terms only decay once k > 2 E^2 |z|; widen by the slab half-width rho0
  const double kScreened = d == 2 ? kmax + 2.0 * e * e * rho0 : kmax;
  const double kList = std::max(kScreened, kPure);

  double alphaNorm = alpha_.norm();
  Lattice dual(d, std::vector<Vec3>(bz_.duals.begin(), bz_.duals.begin() + d));
  const TruncationIndex qs = latticePoints(dual, kList + alphaNorm + 1e-9 / scale);
  for (const auto& q : qs.points) {
    const Vec3 k = alpha_ + bz_.dualPoint(q);
    const double kn = k.norm();
    if (kn >= kList) continue;
    waves_.push_back(k);
    waveNorms_.push_back(kn);
    double w = 0.0;
    if (d == 3) w = std::exp(-kn * kn / (4.0 * e * e)) / (kn * kn * cell);
    waveWeights_.push_back(w);
  }
  if (d == 1) {
    seriesTerms_ = kSeriesTerms;
    expint_.resize(waves_.size() * static_cast<std::size_t>(seriesTerms_));
    for (std::size_t w = 0; w < waves_.size(); ++w) {
      const double x = waveNorms_[w] * waveNorms_[w] / (4.0 * e * e);
      for (int j = 0; j < seriesTerms_; ++j)
        expint_[w * static_cast<std::size_t>(seriesTerms_) + static_cast<std::size_t>(j)] =
            x > 700.0 ? 0.0 : boost::math::expint(j + 1, x);
    }
  }
}

LatticeIndex QuasiPeriodicGreens::nearestLatticeIndex(const Vec3& x) const {
  LatticeIndex m0{0, 0, 0};
  for (int k = 0; k < lattice_.dimension(); ++k)
    m0[k] = static_cast<int>(std::floor(x.dot(bz_.duals[k]) / (2.0 * kPi) + 0.5));
  return m0;
}

cdouble QuasiPeriodicGreens::operator()(const Vec3& x) const {
  const LatticeIndex m0 = nearestLatticeIndex(x);
  if (m0 == LatticeIndex{0, 0, 0}) return evaluate(x, false);
  const Vec3 shift = lattice_.position(m0);
  return std::polar(1.0, alpha_.dot(shift)) * evaluate(x - shift, false);
}

cdouble QuasiPeriodicGreens::regular(const Vec3& x) const {
  const LatticeIndex m0 = nearestLatticeIndex(x);
  if (m0 == LatticeIndex{0, 0, 0}) return evaluate(x, true);
  const Vec3 shift = lattice_.position(m0);
  return std::polar(1.0, alpha_.dot(shift)) * evaluate(x - shift, false) - kInvFourPi / x.norm();
}

cdouble QuasiPeriodicGreens::evaluate(const Vec3& x, bool subtractSingular) const {
  if (!subtractSingular) {
    // points on the lattice itself are singular
    require(x.norm() > 1e-14 * lattice_.scale(), ErrorKind::InvalidArgument,
            "quasi-periodic Green's function evaluated on a lattice point");
  }
  switch (scheme_.method) {
    case SumMethod::Kummer: return kummer(x, subtractSingular);
    case SumMethod::DirectPartial: return direct(x, subtractSingular);
    case SumMethod::Ewald: break;
  }
  const int d = lattice_.dimension();
  const double rho = lattice_.perpendicularPart(x).norm();
  const double rho0 = std::sqrt(kPi) / splitting_;
  if (d < 3 && rho >= rho0) {
    // unscreened spectral form, exponentially convergent away from the lattice span
    cdouble s = 0.0;
    const double cell = lattice_.cellMeasure();
    for (std::size_t w = 0; w < waves_.size(); ++w) {
      const double k = waveNorms_[w];
      const cdouble phase = std::polar(1.0, waves_[w].dot(x));
      if (d == 1)
        s += phase * (boost::math::cyl_bessel_k(0, k * rho) / (2.0 * kPi));
      else
        s += phase * (std::exp(-k * rho) / (2.0 * k));
    }
    s /= cell;
    if (subtractSingular) s -= kInvFourPi / x.norm();
    return s;
  }
  return ewaldSpatial(x, subtractSingular, splitting_) + ewaldSpectral(x, splitting_);
}

cdouble QuasiPeriodicGreens::ewaldSpatial(const Vec3& x, bool subtractSingular, double e) const {
  cdouble s = 0.0;
  if (lattice_.dimension() == 1) {
    const double ell = lattice_.generator(0).norm();
    const Vec3 dir = lattice_.frame(0);
    const double x1 = x.dot(dir);
    const int lo = static_cast<int>(std::floor((x1 - spatialRadius_) / ell)) - 1;
    const int hi = static_cast<int>(std::ceil((x1 + spatialRadius_) / ell)) + 1;
    for (int m = lo; m <= hi; ++m) {
      const Vec3 p = lattice_.position({m, 0, 0});
      const double r = (x - p).norm();
      const cdouble phase = std::polar(1.0, alpha_.dot(p));
      if (m == 0 && subtractSingular)
        s += phase * negErfOverR(e, r);
      else
        s += phase * (std::erfc(e * r) / r);
    }
    return s * kInvFourPi;
  }
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const double r = (x - points_[k]).norm();
    if (subtractSingular && points_[k].isZero(0.0))
      s += phases_[k] * negErfOverR(e, r);
    else
      s += phases_[k] * (std::erfc(e * r) / r);
  }
  return s * kInvFourPi;
}

cdouble QuasiPeriodicGreens::ewaldSpectral(const Vec3& x, double e) const {
  const int d = lattice_.dimension();
  if (d == 1) return spectral1D(x);
  cdouble s = 0.0;
  if (d == 3) {
    for (std::size_t w = 0; w < waves_.size(); ++w) s += waveWeights_[w] * std::polar(1.0, waves_[w].dot(x));
    return s;
  }
  const double z = x.dot(lattice_.frame(2));
  for (std::size_t w = 0; w < waves_.size(); ++w) {
    const double k = waveNorms_[w];
    const double f = (screenedExp(k, z, e) + screenedExp(k, -z, e)) / (4.0 * k);
    s += f * std::polar(1.0, waves_[w].dot(x));
  }
  return s / lattice_.cellMeasure();
}

cdouble QuasiPeriodicGreens::spectral1D(const Vec3& x) const {
  const double e = splitting_;
  const double rho = lattice_.perpendicularPart(x).norm();
  const double u = (e * rho) * (e * rho);
  cdouble s = 0.0;
  for (std::size_t w = 0; w < waves_.size(); ++w) {
    const double* en = &expint_[w * static_cast<std::size_t>(seriesTerms_)];
    double f = 0.0;
    double c = 1.0;
    for (int j = 0; j < seriesTerms_; ++j) {
      f += c * en[j];
      c *= -u / (j + 1);
      if (std::abs(c) < 1e-18) break;
    }
    s += f * std::polar(1.0, waves_[w].dot(x));
  }
  return s * (kInvFourPi / lattice_.cellMeasure());
}

cdouble QuasiPeriodicGreens::kummer(const Vec3& x, bool subtractSingular) const {
  const double ell = lattice_.generator(0).norm();
  const Vec3 dir = lattice_.frame(0);
  const double theta = alpha_.dot(lattice_.generator(0));
  const double x1 = x.dot(dir);
  const double r2 = x.squaredNorm();
  // remainder terms are bounded by ~ 2 |x|^2 / (|m| ell)^3, summing to 2 |x|^2 / (ell^3 M^2)
  const double scale = std::max(r2, ell * ell);
  long long mmax = static_cast<long long>(std::ceil(std::sqrt(2.0 * scale / (std::pow(ell, 3) * scheme_.tolerance * 4.0 * kPi))));
  mmax = std::clamp<long long>(mmax, 16, 20000000);
  cdouble rem = 0.0;
  for (long long m = mmax; m >= 1; --m) {
    for (int sgn = -1; sgn <= 1; sgn += 2) {
      const double mm = static_cast<double>(sgn * m);
      const Vec3 p = (mm * ell) * dir;
      const double r = (x - p).norm();
      const double term = 1.0 / r - 1.0 / (static_cast<double>(m) * ell) - x1 * sgn / (mm * mm * ell * ell);
      rem += std::polar(term, theta * mm);
    }
  }
  cdouble g = rem;
  if (!subtractSingular) g += 1.0 / std::sqrt(r2);
  g += -2.0 / ell * std::log(std::abs(2.0 * std::sin(theta / 2.0)));
  g += cdouble(0.0, 2.0 * x1 / (ell * ell) * clausen2(theta));
  return g * kInvFourPi;
}

cdouble QuasiPeriodicGreens::direct(const Vec3& x, bool subtractSingular) const {
  const int d = lattice_.dimension();
  const int mc = scheme_.directCutoff;
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};
  for (int k = 0; k < d; ++k) {
    lo[k] = -mc;
    hi[k] = mc;
  }
  cdouble s = 0.0;
  LatticeIndex m{0, 0, 0};
  for (m[0] = lo[0]; m[0] <= hi[0]; ++m[0])
    for (m[1] = lo[1]; m[1] <= hi[1]; ++m[1])
      for (m[2] = lo[2]; m[2] <= hi[2]; ++m[2]) {
        if (subtractSingular && m == LatticeIndex{0, 0, 0}) continue;
        double w = 1.0;
        for (int k = 0; k < d; ++k)
          if (std::abs(m[k]) == mc) w *= 0.5;
        const Vec3 p = lattice_.position(m);
        s += std::polar(w / (x - p).norm(), alpha_.dot(p));
      }
  return s * kInvFourPi;
}

cdouble quasiGreens(const Lattice& lattice, const Vec3& x, const Vec3& alpha,
                    const LatticeSumScheme& scheme) {
  return QuasiPeriodicGreens(lattice, alpha, scheme)(x);
}

}  // namespace capmat
