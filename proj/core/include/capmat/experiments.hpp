#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "capmat/config.hpp"
#include "capmat/floquet.hpp"
#include "capmat/latticegreen.hpp"
#include "capmat/ratefit.hpp"
#include "capmat/serialize.hpp"

namespace capmat {

/// Zone quadrature for the configured lattice. With no explicit point count: chains use the
/// graded rule with M a power of two >= max(16, 4 * truncated_max), square lattices M = 32,
/// cubic lattices M = 16.
BZQuadrature configuredQuadrature(const ExperimentConfig& config, const Lattice& lattice);

/// Quasi-periodic samples on a quadrature, memoized per process (and on disk when a cache
/// directory is configured) by geometry hash, backend, scheme and quadrature.
QuasiCapacitanceGrid cachedGrid(const ExperimentConfig& config, const QuasiCapacitanceEvaluator& evaluator,
                                const BZQuadrature& quad);

/// Real-space coefficients from the configured quadrature and its doubling (cached grids).
RealSpaceCoefficients cachedCoefficients(const ExperimentConfig& config, const QuasiCapacitanceEvaluator& evaluator,
                                         const std::vector<LatticeIndex>& points);

void clearCaches();

struct ConvergenceRow {
  double r = 0.0;
  std::size_t cells = 0;
  double value = 0.0;
  double reference = 0.0;
  double error = 0.0;
};

struct CapacitanceConvergence {
  double reference = 0.0;  // C^0_11
  double quadratureDelta = 0.0;
  std::vector<ConvergenceRow> rows;
  RateFit fit;
};

CapacitanceConvergence runCapacitanceConvergence(const ExperimentConfig& config);

/// Extent of the generalized bands over a uniform grid of band_points per direction.
struct BandWindow {
  std::vector<double> bandMin;
  std::vector<double> bandMax;
  double lower() const { return bandMin.front(); }
  double upper() const { return bandMax.back(); }
};

BandWindow bandWindow(const QuasiCapacitanceEvaluator& evaluator, const MaterialParams& materials,
                      const BZQuadrature& grid);

struct DefectRootResult {
  std::optional<double> lambda0;
  double bandMax = 0.0;
  double refinementDelta = 0.0;  // relative change of lambda0 under the last grid doubling
  int quadraturePoints = 0;
};

/// Root of the single-site defect equation for N = 1, doubling the zone grid until lambda0
/// changes by less than 1e-8 relative (at most four doublings).
DefectRootResult solveDefectRoot(const ExperimentConfig& config, double eta);

struct ModeSeries {
  std::string mode;  // top | even | odd
  std::vector<ConvergenceRow> rows;
  std::vector<double> parity;
  double reference = 0.0;
  std::string referenceSource;  // defect-equation | richardson
  RateFit fit;
};

struct DefectConvergence {
  std::vector<ModeSeries> modes;
  BandWindow window;
  std::optional<double> lambda0;
  /// Top eigenvalue of B C_t on the rungs r <= truncated_max (empty for dislocations).
  std::vector<ConvergenceRow> truncated;
  double c0 = 0.0;  // C^0_11 used to build C_t
};

DefectConvergence runDefectConvergence(const ExperimentConfig& config);

struct BandPoint {
  std::size_t index = 0;
  double eigenvalue = 0.0;
  double frequency = 0.0;
  Vec3 alpha = Vec3::Zero();
  double bandFrequency = 0.0;
  double distance = 0.0;  // relative frequency distance to the nearest band at alpha
  bool flat = false;
  bool matched = false;
};

struct BandCurvePoint {
  Vec3 alpha = Vec3::Zero();
  double lambda = 0.0;
  double frequency = 0.0;
  bool matched = false;
};

struct BandReconstruction {
  std::size_t cells = 0;
  std::vector<BandPoint> points;
  std::vector<BandCurvePoint> curve;
  std::size_t flagged = 0;
  double matchedFraction = 0.0;
  /// Curve nodes adjacent to the zone centre with no finite-structure frequency within tolerance.
  std::size_t unmatchedNearGamma = 0;
};

BandReconstruction runBandReconstruction(const ExperimentConfig& config);

struct RunOutput {
  std::string command;
  std::string geometryHash;
  std::vector<Table> tables;
  std::string summaryJson;  // command-specific results
};

const std::vector<std::string>& commandNames();

/// Throws InvalidArgument for an unknown command.
RunOutput runCommand(const std::string& command, const ExperimentConfig& config);

/// run.json text: command, resolved config, geometry hash, versions, threads, wall clock, summary.
std::string runManifest(const RunOutput& run, const ExperimentConfig& config, double wallSeconds, int threads);

/// Writes each table as <name>.csv and the manifest as run.json.
void writeRun(const std::string& directory, const RunOutput& run, const std::string& manifest);

}  // namespace capmat
