#include "capmat/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "capmat/error.hpp"
#include "capmat/ratefit.hpp"

namespace capmat {

void DefectSpec::set(const LatticeIndex& m, int resonator, double b) { entries[{m, resonator}] = b; }

DefectSpec DefectSpec::singleSite(double eta) {
  DefectSpec s;
  s.set({0, 0, 0}, 0, 1.0 + eta);
  return s;
}

Eigen::VectorXd buildDefectMatrix(const DefectSpec& spec, const TruncationIndex& index, int N) {
  require(N >= 1, ErrorKind::InvalidArgument, "resonators per cell must be positive");
  Eigen::VectorXd b = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(index.size()) * N);
  for (const auto& [key, value] : spec.entries) {
    const auto& [m, i] = key;
    const auto cell = index.find(m);
    require(cell.has_value() && i >= 0 && i < N, ErrorKind::SupportOutsideTruncation,
            "defect entry at cell (" + std::to_string(m[0]) + "," + std::to_string(m[1]) + "," +
                std::to_string(m[2]) + "), resonator " + std::to_string(i) + " lies outside the truncation");
    require(value > 0.0 && std::isfinite(value), ErrorKind::NonPositiveDefect, "defect weights must be positive");
    b(static_cast<Eigen::Index>(*cell) * N + i) = value;
  }
  return b;
}

Eigen::VectorXd generalizedWeights(const MaterialParams& materials, std::size_t cells) {
  const std::vector<double> s = materials.scaleFactors();
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd w(static_cast<Eigen::Index>(cells) * n);
  for (std::size_t c = 0; c < cells; ++c)
    for (Eigen::Index i = 0; i < n; ++i) w(static_cast<Eigen::Index>(c) * n + i) = s[static_cast<std::size_t>(i)];
  return w;
}

CapacitanceBlocks generalizedScale(const CapacitanceBlocks& c, const MaterialParams& materials) {
  require(c.provenance != Provenance::Generalized, ErrorKind::InvalidArgument,
          "capacitance blocks are already generalized");
  materials.validate(static_cast<std::size_t>(c.N));
  CapacitanceBlocks out = c;
  out.provenance = Provenance::Generalized;
  out.entries = generalizedWeights(materials, c.blockIndex.size()).asDiagonal() * c.entries;
  return out;
}

LocalizationMetrics localizationMetrics(const Eigen::VectorXd& u, const TruncationIndex& index, int N) {
  require(u.size() == static_cast<Eigen::Index>(index.size()) * N, ErrorKind::LengthMismatch,
          "vector length does not match the truncation");
  const double s2 = u.squaredNorm();
  require(s2 > 0.0, ErrorKind::ZeroVector, "localization metrics of the zero vector");
  LocalizationMetrics out;
  const double s4 = u.array().pow(4).sum();
  out.participationRatio = s2 * s2 / s4 / static_cast<double>(u.size());

  std::vector<double> amp(index.size());
  for (std::size_t m = 0; m < index.size(); ++m)
    amp[m] = u.segment(static_cast<Eigen::Index>(m) * N, N).norm();
  out.peakCell = static_cast<std::size_t>(std::max_element(amp.begin(), amp.end()) - amp.begin());
  const LatticeIndex& p = index.points[out.peakCell];
  std::vector<double> x, y;
  for (std::size_t m = 0; m < index.size(); ++m) {
    if (!(amp[m] > 0.0)) continue;
    const LatticeIndex& q = index.points[m];
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += double(q[k] - p[k]) * (q[k] - p[k]);
    x.push_back(std::sqrt(d2));
    y.push_back(std::log(amp[m]));
  }
  bool spread = false;
  for (double v : x) spread = spread || v != x.front();
  if (x.size() >= 2 && spread) {
    const LineFit f = fitLine(x, y);
    out.decayRate = -f.slope;
    out.decayR2 = f.r2;
  }
  return out;
}

SpectrumResult defectEigensolve(const CapacitanceBlocks& c, const Eigen::VectorXd& b, const MaterialParams* materials,
                                const EigensolveOptions& options) {
  const auto n = c.entries.rows();
  require(c.entries.cols() == n && b.size() == n, ErrorKind::LengthMismatch,
          "defect matrix and capacitance matrix sizes differ");
  require(c.provenance != Provenance::Generalized, ErrorKind::InvalidArgument,
          "pass the symmetric capacitance and fold material scaling into B");
  Eigen::VectorXd bp = b;
  if (materials) {
    materials->validate(static_cast<std::size_t>(c.N));
    bp = bp.cwiseProduct(generalizedWeights(*materials, c.blockIndex.size()));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    require(bp(i) > 0.0 && std::isfinite(bp(i)), ErrorKind::NonPositiveDefect,
            "defect weights must be positive for the symmetric reduction");
  const Eigen::VectorXd root = bp.cwiseSqrt();
  Eigen::MatrixXd sym = root.asDiagonal() * c.entries * root.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, options.vectors ? Eigen::ComputeEigenvectors
                                                                           : Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorKind::IllConditioned, "symmetric eigensolve did not converge");
  SpectrumResult out;
  out.eigenvalues = es.eigenvalues();
  if (!options.vectors) return out;
  out.eigenvectors = root.asDiagonal() * es.eigenvectors();
  const double lmax = out.eigenvalues.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd bc = bp.asDiagonal() * c.entries;
  const Eigen::MatrixXd res = bc * out.eigenvectors - out.eigenvectors * out.eigenvalues.asDiagonal();
  for (Eigen::Index k = 0; k < n; ++k)
    out.maxResidual = std::max(out.maxResidual, res.col(k).norm() / (lmax * out.eigenvectors.col(k).norm()));
  if (!(out.maxResidual <= 1e-9))
    fail(ErrorKind::IllConditioned, "eigenpair residual " + std::to_string(out.maxResidual) + " exceeds 1e-9");
  if (options.metrics) {
    TruncationIndex idx;
    idx.points = c.blockIndex;
    for (Eigen::Index k = 0; k < n; ++k)
      out.metrics.push_back(localizationMetrics(out.eigenvectors.col(k), idx, c.N));
  }
  return out;
}

std::optional<double> defectRoot(const std::vector<double>& band, const std::vector<double>& weights, double eta) {
  require(band.size() == weights.size() && !band.empty(), ErrorKind::LengthMismatch,
          "band samples and weights differ in length");
  require(eta > -1.0, ErrorKind::InvalidArgument, "eta must exceed -1 so that the defect weight stays positive");
  if (eta <= 0.0) return std::nullopt;
  const double top = *std::max_element(band.begin(), band.end());
  require(top > 0.0, ErrorKind::BandDataInsufficient, "band samples must be positive");
  double mean = 0.0;
  for (std::size_t k = 0; k < band.size(); ++k) mean += weights[k] * band[k];
  auto f = [&](double lambda) {
    double s = 0.0;
    for (std::size_t k = 0; k < band.size(); ++k) s += weights[k] * band[k] / (lambda - band[k]);
    return eta * s - 1.0;
  };
  double lo = top * (1.0 + 1e-8);
  double hi = std::max(2.0 * top, 10.0 * eta * mean);
  double flo = f(lo);
  double fhi = f(hi);
  require(flo > 0.0 && fhi < 0.0, ErrorKind::BandDataInsufficient,
          "defect equation has no sign change across the bracket");
  // f is a sum of decreasing terms; check on a coarse ladder that the samples honour that
  double prev = flo;
  for (int k = 1; k <= 16; ++k) {
    const double v = f(lo + (hi - lo) * k / 16.0);
    require(v <= prev, ErrorKind::BandDataInsufficient, "defect equation is not decreasing across the bracket");
    prev = v;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm > 0.0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
    if (hi - lo <= 4e-16 * hi) break;
  }
  const double root = std::abs(flo) < std::abs(fhi) ? lo : hi;
  require(std::abs(f(root)) <= 1e-10 || hi - lo <= 4e-16 * hi, ErrorKind::BandDataInsufficient,
          "defect equation did not reach the residual target");
  return root;
}

std::vector<double> resonantFrequencies(const std::vector<double>& eigenvalues) {
  std::vector<double> out;
  out.reserve(eigenvalues.size());
  for (double l : eigenvalues) {
    require(l >= 0.0, ErrorKind::NegativeEigenvalue, "eigenvalue " + std::to_string(l) + " is negative");
    out.push_back(std::sqrt(l));
  }
  return out;
}

}  // namespace capmat
