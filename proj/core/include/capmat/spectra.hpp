#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "capmat/geometry.hpp"
#include "capmat/materials.hpp"
#include "capmat/singlelayer.hpp"

namespace capmat {

/// Diagonal defect weights b_i^m; entries not listed are 1.
struct DefectSpec {
  std::map<std::pair<LatticeIndex, int>, double> entries;

  void set(const LatticeIndex& m, int resonator, double b);
  /// b = 1 + eta on resonator 0 of cell 0.
  static DefectSpec singleSite(double eta);
};

/// Diagonal of B_t in canonical block order. Throws SupportOutsideTruncation for entries whose
/// cell or resonator is outside the truncation, NonPositiveDefect for b <= 0.
Eigen::VectorXd buildDefectMatrix(const DefectSpec& spec, const TruncationIndex& index, int N);

/// delta_i v_i^2 / |D_i| per row, repeated over cells.
Eigen::VectorXd generalizedWeights(const MaterialParams& materials, std::size_t cells);

/// Left-scales every row of resonator i by delta_i v_i^2 / |D_i|.
CapacitanceBlocks generalizedScale(const CapacitanceBlocks& c, const MaterialParams& materials);

struct LocalizationMetrics {
  double participationRatio = 0.0;
  /// Least-squares fit of log(cell amplitude) against the index distance from the peak cell.
  double decayRate = 0.0;
  double decayR2 = 0.0;
  std::size_t peakCell = 0;
};

/// Throws ZeroVector.
LocalizationMetrics localizationMetrics(const Eigen::VectorXd& u, const TruncationIndex& index, int N);

struct SpectrumResult {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns u with u^T (B')^{-1} u = 1; empty if not requested
  std::vector<LocalizationMetrics> metrics;
  double maxResidual = 0.0;  // max_k |B' C u_k - lambda_k u_k| / (|lambda_max| |u_k|)
};

struct EigensolveOptions {
  bool vectors = true;
  bool metrics = false;
};

/// Spectrum of B' C with B' = diag(b) * generalized weights (materials may be null for B' = diag(b)).
/// Solved through the symmetric form (B')^{1/2} C (B')^{1/2}.
SpectrumResult defectEigensolve(const CapacitanceBlocks& c, const Eigen::VectorXd& b,
                                const MaterialParams* materials = nullptr, const EigensolveOptions& options = {});

/// Root lambda_0 of (eta) sum_k w_k lambda_k / (lambda - lambda_k) = 1 above the band, for
/// band samples lambda_k with normalized weights w_k. Empty for eta <= 0.
/// Throws BandDataInsufficient if f is not decreasing across the bracket.
std::optional<double> defectRoot(const std::vector<double>& band, const std::vector<double>& weights, double eta);

/// omega_n = sqrt(lambda_n); throws NegativeEigenvalue.
std::vector<double> resonantFrequencies(const std::vector<double>& eigenvalues);

}  // namespace capmat
