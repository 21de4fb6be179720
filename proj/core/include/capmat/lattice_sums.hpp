#pragma once

#include <complex>
#include <string>
#include <vector>

#include "capmat/geometry.hpp"

namespace capmat {

enum class SumMethod { Ewald, Kummer, DirectPartial };

std::string toString(SumMethod m);
SumMethod sumMethodFromString(const std::string& s);

/// How the quasi-periodic lattice sum is evaluated.
///
/// Ewald: Gaussian-screened spatial sum plus spectral sum (all d). Cutoffs of 0 are chosen
/// from the tolerance; explicit cutoffs are radii in units of the cell scale (spatial) and
/// of 2 pi / scale (spectral).
/// Kummer: d = 1 only, tail subtraction with closed-form log and Clausen sums.
/// DirectPartial: cube partial sum |m_k| <= directCutoff with half weights on the boundary.
struct LatticeSumScheme {
  SumMethod method = SumMethod::Ewald;
  double tolerance = 1e-12;
  double splitting = 0.0;  // 0 selects sqrt(pi) / scale
  double spatialCutoff = 0.0;
  double spectralCutoff = 0.0;
  int directCutoff = 64;

  std::string name() const;
};

using cdouble = std::complex<double>;

/// G^alpha(x) = sum_m e^{i alpha.m} / (4 pi |x - m|) for one lattice and quasi-momentum.
class QuasiPeriodicGreens {
 public:
  QuasiPeriodicGreens(const Lattice& lattice, const Vec3& alpha, const LatticeSumScheme& scheme);

  /// Full sum; x must not be a lattice point.
  cdouble operator()(const Vec3& x) const;
  /// G^alpha(x) - 1/(4 pi |x|), smooth near the origin.
  cdouble regular(const Vec3& x) const;

  /// Bound on the truncation error of any single evaluation.
  double errorEstimate() const noexcept { return errorEstimate_; }
  const Vec3& alpha() const noexcept { return alpha_; }
  const Lattice& lattice() const noexcept { return lattice_; }
  double splitting() const noexcept { return splitting_; }

 private:
  LatticeIndex nearestLatticeIndex(const Vec3& x) const;
  cdouble evaluate(const Vec3& x, bool subtractSingular) const;
  cdouble ewaldSpatial(const Vec3& x, bool subtractSingular, double e) const;
  cdouble ewaldSpectral(const Vec3& x, double e) const;
  cdouble spectral1D(const Vec3& x) const;
  cdouble kummer(const Vec3& x, bool subtractSingular) const;
  cdouble direct(const Vec3& x, bool subtractSingular) const;

  Lattice lattice_;
  BrillouinZone bz_;
  Vec3 alpha_;
  LatticeSumScheme scheme_;
  double splitting_ = 0.0;
  double errorEstimate_ = 0.0;
  double spatialRadius_ = 0.0;

  // spatial lattice points with phases
  std::vector<Vec3> points_;
  std::vector<cdouble> phases_;
  // spectral wave vectors alpha + q with weights
  std::vector<Vec3> waves_;
  std::vector<double> waveNorms_;
  std::vector<double> waveWeights_;
  // d = 1: E_{j+1}(k^2 / 4E^2) per wave, j < seriesTerms_
  std::vector<double> expint_;
  int seriesTerms_ = 0;
};

/// One-off evaluation of G^alpha(x).
cdouble quasiGreens(const Lattice& lattice, const Vec3& x, const Vec3& alpha,
                    const LatticeSumScheme& scheme);

/// exp(x^2) erfc(x) for x >= 0.
double erfcx(double x);

/// Clausen function Cl_2(theta) = sum_{k >= 1} sin(k theta) / k^2.
double clausen2(double theta);

}  // namespace capmat
