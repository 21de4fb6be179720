#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "capmat/geometry.hpp"

namespace capmat {

enum class BackendKind { PanelP0, SphericalMultipole };

struct Backend {
  BackendKind kind = BackendKind::SphericalMultipole;
  int level = 3;  // panel refinement level
  int order = 2;  // multipole order L

  static Backend panel(int level) { return {BackendKind::PanelP0, level, 0}; }
  static Backend multipole(int order) { return {BackendKind::SphericalMultipole, 0, order}; }

  std::string name() const;
  /// Degrees of freedom per sphere.
  int dofsPerSphere() const;
  void validate() const;
};

inline constexpr int kMaxMultipoleOrder = 6;
inline constexpr double kMaxConditionNumber = 1e12;

/// Dense discretization of the single layer operator on a set of spheres.
///
/// Multipole dofs are amplitudes of sqrt(4 pi) Y_lm / R; panel dofs are charge per area.
/// In both cases the capacitance is loadScale * loads^T op^{-1} loads.
template <class Scalar>
struct DiscreteOperator {
  Backend backend;
  std::vector<std::size_t> offsets;  // first dof of each sphere, plus the total
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix op;
  Eigen::MatrixXd loads;  // totalDof x sphereCount
  double loadScale = 1.0;
  double conditionEstimate = 0.0;
  /// Cholesky factor computed during assembly and reused by the solves.
  std::shared_ptr<const Eigen::LLT<Matrix>> factor;

  std::size_t sphereCount() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t dofCount() const noexcept { return offsets.empty() ? 0 : offsets.back(); }
};

using DiscreteSingleLayer = DiscreteOperator<double>;

struct BoundaryDensity {
  Eigen::VectorXd coefficients;
};

enum class Provenance { Finite, TruncatedInfinite, Generalized };

std::string toString(Provenance p);
Provenance provenanceFromString(const std::string& s);

/// Symmetric matrix indexed by (lattice point, resonator) in canonical order.
struct CapacitanceBlocks {
  std::vector<LatticeIndex> blockIndex;
  int N = 1;
  Eigen::MatrixXd entries;
  Provenance provenance = Provenance::Finite;
  std::string geometryHash;

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  /// (C^{mn})_{ij} by block positions in blockIndex.
  double block(std::size_t m, std::size_t n, int i, int j) const {
    return entries(static_cast<Eigen::Index>(m * N + i), static_cast<Eigen::Index>(n * N + j));
  }
};

DiscreteSingleLayer assembleSingleLayer(const std::vector<Sphere>& spheres, const Backend& backend);
/// Assembly only: no factorization and no conditioning check.
DiscreteSingleLayer assembleFreeSpace(const std::vector<Sphere>& spheres, const Backend& backend);
DiscreteSingleLayer assembleSingleLayer(const FiniteStructure& structure, const Backend& backend);

/// Densities op^{-1} loads[:, target] for each requested sphere, from one Cholesky factorization.
std::vector<BoundaryDensity> solveDensities(const DiscreteSingleLayer& op,
                                            const std::vector<std::size_t>& targets);

/// Capacitance matrix of the discretized spheres (factor once, solve all).
Eigen::MatrixXd capacitanceOf(const DiscreteSingleLayer& op);
Eigen::MatrixXd capacitanceOf(const std::vector<Sphere>& spheres, const Backend& backend);

CapacitanceBlocks finiteCapacitance(const UnitCell& cell, const Lattice& lattice,
                                    const TruncationIndex& index, const Backend& backend);
CapacitanceBlocks finiteCapacitance(const UnitCell& cell, const Lattice& lattice, double r,
                                    const Backend& backend);

// Multipole building blocks, shared with the quasi-periodic operator.

/// Integrals J(a, b, k) = int int Y_a(w) Y_b(w') R_k(Ri w - Rj w') over both unit spheres.
/// Only degree(k) = degree(a) + degree(b) is nonzero; that slice is stored.
class CouplingTensor {
 public:
  CouplingTensor(int order, double ri, double rj);

  int order() const noexcept { return order_; }
  /// Block entries Ri Rj sum_k h_k J(a, b, k) for translation coefficients h over degree <= 2L.
  template <class Scalar>
  void contract(const Scalar* h, Scalar* block, Eigen::Index ld) const;

 private:
  int order_;
  double ri_;
  double rj_;
  std::vector<double> values_;  // per (a, b): 2n + 1 values, n = l_a + l_b
  std::vector<std::size_t> start_;
};

/// Cached tensor for a radius pair (thread-safe).
std::shared_ptr<const CouplingTensor> couplingTensor(int order, double ri, double rj);

/// Free-space translation coefficients (-1)^n / (2n + 1) I_k(t) for degree <= 2L.
void freeSpaceTranslation(int order, const Vec3& t, double* h);

}  // namespace capmat
