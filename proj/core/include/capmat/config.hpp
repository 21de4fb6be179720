#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "capmat/floquet.hpp"
#include "capmat/geometry.hpp"
#include "capmat/lattice_sums.hpp"
#include "capmat/materials.hpp"
#include "capmat/singlelayer.hpp"
#include "capmat/spectra.hpp"

namespace capmat {

struct DefectEntryConfig {
  LatticeIndex cell{0, 0, 0};
  int resonator = 0;
  double b = 1.0;
};

/// Dimerized chain with a central pair removed. Positions are in units of the cell length
/// offsets; cells m with |m + 1/2| < K are kept.
struct DislocationConfig {
  bool enabled = false;
  double cellLength = 7.0;
  std::array<double, 2> offsets{2.25, 4.75};
  std::vector<double> removed{-2.25, 2.25};
};

struct ExperimentConfig {
  // geometry
  std::string lattice = "chain";          // chain | square | cubic | custom
  std::vector<Vec3> generators;           // custom lattices only
  double spacing = 3.0;
  double radius = 1.0;
  std::vector<Sphere> cell;               // empty: one sphere of `radius` at the origin
  DislocationConfig dislocation;

  Backend backend = Backend::multipole(2);
  LatticeSumScheme scheme;

  // Brillouin-zone quadrature; 0 selects a default from the dimension and requested coefficients
  int quadraturePoints = 0;
  std::string quadratureKind = "standard";  // standard | uniform | graded
  FloquetOptions floquet;
  int bandPoints = 256;

  // truncation radii in units of the lattice spacing
  double r = 8.0;
  std::vector<double> ladder;
  double truncatedMax = 32.0;
  Vec3 centre = Vec3::Zero();  // truncation ball centre in lattice coordinates

  std::vector<Vec3> alphas;  // cap-quasi; empty means the quadrature nodes
  std::vector<LatticeIndex> coefficients;  // cap-realspace; empty means all differences within r

  // spectra
  std::string source = "finite";  // finite | truncated
  std::optional<double> eta;
  std::vector<DefectEntryConfig> defects;
  double contrast = 1e-3;
  double speed = 1.0;
  double inGapMargin = 1e-3;

  double matchTolerance = 0.05;
  std::uint64_t seed = 1;
  std::string cacheDir;

  UnitCell unitCell() const;
  Lattice makeLattice() const;
  MaterialParams materials() const;
  DefectSpec defectSpec() const;
  /// Truncation ball of radius r (in lattice spacings) around the configured centre.
  TruncationIndex truncation(const Lattice& lattice, double r) const;
  /// Ladder with the command default when none was configured.
  std::vector<double> ladderOr(const std::vector<double>& fallback) const;
};

/// Parses a TOML or JSON document (chosen by extension, or by content when ambiguous).
/// Throws ConfigInvalid on unknown keys, wrong types or values outside their domain.
ExperimentConfig loadConfig(const std::string& path);
ExperimentConfig parseConfig(const std::string& text, const std::string& format);

/// Fully resolved configuration as canonical JSON text.
std::string configToJson(const ExperimentConfig& config);

}  // namespace capmat
