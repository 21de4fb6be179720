#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "capmat/geometry.hpp"
#include "capmat/harmonics.hpp"
#include "capmat/lattice_sums.hpp"
#include "capmat/materials.hpp"
#include "capmat/singlelayer.hpp"

namespace capmat {

using QuasiSingleLayer = DiscreteOperator<cdouble>;

struct QuasiCapacitanceSample {
  Vec3 alpha = Vec3::Zero();
  Eigen::MatrixXcd matrix;
  std::string backend;
  std::string scheme;
};

/// Quasi-periodic single layer and capacitance for one periodic cell, reusable across many alpha.
///
/// The operator is the free-space operator of the cell plus the smooth lattice remainder
/// H = G^alpha - K. For the multipole backend H is expanded in regular solid harmonics around
/// each centre separation (projection on a small sphere), so each block is exact at order L up
/// to the lattice-sum tolerance. The panel backend evaluates H at every panel pair.
class QuasiCapacitanceEvaluator {
 public:
  QuasiCapacitanceEvaluator(UnitCell cell, Lattice lattice, Backend backend, LatticeSumScheme scheme);

  QuasiSingleLayer singleLayer(const Vec3& alpha) const;
  Eigen::MatrixXcd capacitance(const Vec3& alpha) const;
  QuasiCapacitanceSample sample(const Vec3& alpha) const;
  /// Evaluated in parallel over alpha; order matches the input.
  std::vector<Eigen::MatrixXcd> capacitances(const std::vector<Vec3>& alphas) const;

  const UnitCell& cell() const noexcept { return cell_; }
  const Lattice& lattice() const noexcept { return lattice_; }
  const Backend& backend() const noexcept { return backend_; }
  const LatticeSumScheme& scheme() const noexcept { return scheme_; }

  /// Free-space operator of the isolated cell (no lattice images).
  const DiscreteSingleLayer& freeOperator() const noexcept { return free_; }

  /// Adds the lattice remainder built from `regular` (a callable x -> H(x)) to `op`.
  template <class RegularFn>
  void addRemainder(RegularFn&& regular, QuasiSingleLayer::Matrix& op) const;

 private:
  struct PairData {
    std::size_t i = 0;
    std::size_t j = 0;
    Vec3 t = Vec3::Zero();
    double rho = 0.0;
  };

  UnitCell cell_;
  Lattice lattice_;
  Backend backend_;
  LatticeSumScheme scheme_;
  DiscreteSingleLayer free_;
  std::vector<PairData> pairs_;
  SphereRule projection_;
  std::vector<double> projectionHarmonics_;  // per projection node, degree <= 2L
  std::vector<SurfaceMesh> meshes_;
};

QuasiSingleLayer quasiSingleLayer(const UnitCell& cell, const Lattice& lattice, const Vec3& alpha,
                                  const Backend& backend, const LatticeSumScheme& scheme);

QuasiCapacitanceSample quasiCapacitance(const UnitCell& cell, const Lattice& lattice,
                                        const Vec3& alpha, const Backend& backend,
                                        const LatticeSumScheme& scheme);

/// Hermitian capacitance 4 pi-scaled from a quasi-periodic operator.
Eigen::MatrixXcd capacitanceOf(const QuasiSingleLayer& op);

/// Sorted eigenvalues of diag(delta v^2 / |D|) C^alpha (computed in symmetrized form).
Eigen::VectorXd generalizedBandValues(const Eigen::MatrixXcd& quasiCapacitance,
                                      const MaterialParams& materials);

/// Band functions on a grid of quasi-momenta; row k holds the sorted eigenvalues at alphas[k].
Eigen::MatrixXd bandFunction(const QuasiCapacitanceEvaluator& evaluator,
                             const MaterialParams& materials, const std::vector<Vec3>& alphas);

/// Periodic (alpha = 0) Green's function with the zero mode removed, for three-dimensional
/// lattices: (1/|Y|) sum_{q != 0} e^{i q.x} / |q|^2 under the positive kernel.
class PeriodicGreensZero {
 public:
  PeriodicGreensZero(const Lattice& lattice, double tolerance = 1e-12);
  double operator()(const Vec3& x) const;
  /// Value minus 1/(4 pi |x|).
  double regular(const Vec3& x) const;

 private:
  Lattice lattice_;
  double splitting_;
  std::vector<Vec3> points_;
  std::vector<Vec3> waves_;
  std::vector<double> weights_;
};

/// Terms of the small-alpha expansion of the multipole quasi-periodic operator:
/// A^alpha = leading + linear + quadratic + periodic + O(|alpha|).
struct NearGammaRecord {
  Vec3 alpha = Vec3::Zero();
  Eigen::MatrixXcd leading;    // 1/(|Y| |alpha|^2) int int psi psi
  Eigen::MatrixXcd linear;     // i/(|Y| |alpha|^2) int int alpha.(x - y) psi psi
  Eigen::MatrixXcd quadratic;  // -1/(2 |Y| |alpha|^2) int int (alpha.(x - y))^2 psi psi
  Eigen::MatrixXcd periodic;   // operator of the zero-mode-free periodic kernel
  Eigen::MatrixXcd full;       // A^alpha itself
  double residual = 0.0;       // Frobenius norm of full - sum of the four terms
};

NearGammaRecord nearGammaExpansion(const QuasiCapacitanceEvaluator& evaluator, const Vec3& alpha);

}  // namespace capmat
