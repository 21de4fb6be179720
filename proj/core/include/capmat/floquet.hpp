#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "capmat/geometry.hpp"
#include "capmat/latticegreen.hpp"
#include "capmat/ratefit.hpp"
#include "capmat/singlelayer.hpp"

namespace capmat {

enum class QuadratureKind { Uniform, Graded };

std::string toString(QuadratureKind k);
QuadratureKind quadratureKindFromString(const std::string& s);

/// Quadrature over the Brillouin zone, normalized so the weights sum to one (the 1/|Y*| factor
/// is folded in). No node sits at the zone centre.
///
/// Uniform: M^d nodes at fractional coordinates (k + 1/2)/M - 1/2, M even.
/// Graded (chains only): composite 8-point Gauss-Legendre with panels of width 1/M away from the
/// centre and geometrically shrinking panels (ratio 1/2) towards it, which resolves the
/// logarithmic behaviour of the chain integrand at the zone centre.
struct BZQuadrature {
  QuadratureKind kind = QuadratureKind::Uniform;
  int dimension = 1;
  int points = 0;  // M
  std::vector<Vec3> nodes;
  std::vector<double> weights;
  std::vector<std::size_t> mirror;  // index of the node at -alpha

  static BZQuadrature uniform(const Lattice& lattice, int m);
  static BZQuadrature graded(const Lattice& lattice, int m);
  /// Same kind with M doubled.
  BZQuadrature refined(const Lattice& lattice) const;
  /// Uniform for d >= 2, graded for chains.
  static BZQuadrature standard(const Lattice& lattice, int m);

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Quasi-periodic capacitance sampled at every quadrature node.
struct QuasiCapacitanceGrid {
  BZQuadrature quadrature;
  std::vector<Eigen::MatrixXcd> matrices;
};

/// Evaluates one node of each +-alpha pair and fills its mirror by conjugation.
QuasiCapacitanceGrid sampleGrid(const QuasiCapacitanceEvaluator& evaluator, const BZQuadrature& quad);

struct RealSpaceCoefficients {
  int N = 1;
  std::vector<LatticeIndex> points;
  std::vector<Eigen::MatrixXd> matrices;
  QuadratureKind quadratureKind = QuadratureKind::Uniform;
  int quadraturePoints = 0;
  /// Largest |imaginary part| before it was discarded, relative to the largest entry.
  double imaginaryResidue = 0.0;
  /// Largest change of any requested coefficient between M and 2M (absolute).
  double convergenceDelta = 0.0;
  bool extrapolated = false;
  /// Fit of max_ij |C^m_ij| against |m|; empty when fewer than four distances are available.
  std::optional<RateFit> decay;

  std::optional<std::size_t> find(const LatticeIndex& m) const;
  /// Throws MissingCoefficient.
  const Eigen::MatrixXd& at(const LatticeIndex& m) const;
};

/// C^m = sum_k w_k C^{alpha_k} e^{-i alpha_k . m} for each requested m.
RealSpaceCoefficients inverseFloquet(const Lattice& lattice, const QuasiCapacitanceGrid& grid,
                                     const std::vector<LatticeIndex>& points);

struct FloquetOptions {
  /// Allowed change of any coefficient under doubling M, relative to the largest |C^0| entry.
  double tolerance = 1e-4;
  bool checkConvergence = true;
  /// Combine the M and 2M results with the known leading error order where one applies
  /// (uniform square-lattice grids, error O(M^-3) from the kink at the zone centre).
  bool extrapolate = true;
};

/// Coefficients from a grid and, when given, its doubling: applies the convergence check and
/// the optional extrapolation, returning the finer result.
RealSpaceCoefficients realSpaceFromGrids(const Lattice& lattice, const QuasiCapacitanceGrid& coarse,
                                         const QuasiCapacitanceGrid* fine, const std::vector<LatticeIndex>& points,
                                         const FloquetOptions& options = {});

RealSpaceCoefficients realSpaceCapacitance(const QuasiCapacitanceEvaluator& evaluator,
                                           const std::vector<LatticeIndex>& points,
                                           const BZQuadrature& quad, const FloquetOptions& options = {});

/// Every difference m - n for m, n in the index.
std::vector<LatticeIndex> differenceSet(const TruncationIndex& index);

/// Block (m, n) = C^{n-m}: the charge on cell m due to unit potential on cell n.
CapacitanceBlocks truncatedMatrix(const RealSpaceCoefficients& coeffs, const TruncationIndex& index,
                                  const std::string& geometryHash = {});

/// (u_hat)_alpha = sum_m u_m e^{i alpha . m}, one N-vector per alpha.
std::vector<Eigen::VectorXcd> truncatedFloquetTransform(const Eigen::VectorXd& u, const TruncationIndex& index,
                                                        int N, const Lattice& lattice,
                                                        const std::vector<Vec3>& alphas);

struct QuasiperiodicityEstimate {
  Vec3 alpha = Vec3::Zero();
  Vec3 mirror = Vec3::Zero();
  double peak = 0.0;
  double median = 0.0;
  /// Peak below twice the median: the vector is not Bloch-like.
  bool flat = false;
};

/// Grid argmax of |u_hat_alpha| on a uniform grid, refined by one parabola step per lattice
/// direction through the neighbouring nodes.
QuasiperiodicityEstimate estimateQuasiperiodicity(const Eigen::VectorXd& u, const TruncationIndex& index, int N,
                                                  const Lattice& lattice, const BZQuadrature& grid);

}  // namespace capmat
