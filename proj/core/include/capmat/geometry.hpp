#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace capmat {

using Vec3 = Eigen::Vector3d;

/// Integer coordinates of a lattice point; entries beyond the lattice dimension are zero.
using LatticeIndex = std::array<int, 3>;

/// Lattice generated by `dimension` independent vectors in R^3.
///
/// The lattice need not be aligned with the coordinate axes. An orthonormal
/// frame is kept whose first `dimension` vectors span the lattice directions;
/// the remaining ones span the orthogonal complement.
class Lattice {
 public:
  Lattice(int dimension, std::vector<Vec3> generators);

  static Lattice chain(double spacing);
  static Lattice square(double spacing);
  static Lattice cubic(double spacing);
  static Lattice axisAligned(int dimension, double spacing);

  int dimension() const noexcept { return dim_; }
  const Vec3& generator(int k) const { return generators_.at(static_cast<std::size_t>(k)); }
  Vec3 position(const LatticeIndex& m) const;

  /// Measure |Y| of the fundamental domain within the lattice span.
  double cellMeasure() const noexcept { return measure_; }
  /// Characteristic length |Y|^(1/d).
  double scale() const noexcept { return scale_; }

  /// Orthonormal frame vector; indices < dimension() span the lattice.
  const Vec3& frame(int k) const { return frame_.at(static_cast<std::size_t>(k)); }
  Vec3 parallelPart(const Vec3& x) const;
  Vec3 perpendicularPart(const Vec3& x) const { return x - parallelPart(x); }

 private:
  int dim_;
  std::vector<Vec3> generators_;
  std::array<Vec3, 3> frame_;
  double measure_ = 0.0;
  double scale_ = 0.0;
};

/// Dual lattice vectors alpha_i with alpha_i . l_j = 2 pi delta_ij, lying in the lattice span.
struct BrillouinZone {
  int dimension = 0;
  std::array<Vec3, 3> duals{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double volume = 0.0;

  /// Coordinates of alpha in the dual basis (zero beyond the dimension).
  std::array<double, 3> fractional(const Vec3& alpha) const;
  Vec3 fromFractional(const std::array<double, 3>& s) const;
  /// Representative of alpha in the centred zone, fractional coordinates in [-1/2, 1/2).
  Vec3 reduce(const Vec3& alpha) const;
  /// Dual lattice vector with integer coordinates q.
  Vec3 dualPoint(const LatticeIndex& q) const;
};

BrillouinZone dualBasis(const Lattice& lattice);

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;

  double volume() const;
  double area() const;
};

struct UnitCell {
  std::vector<Sphere> spheres;

  std::size_t size() const noexcept { return spheres.size(); }
  std::vector<double> volumes() const;
};

/// Minimum surface gap accepted between two resonators, relative to the smaller radius.
inline constexpr double kMinimumRelativeGap = 1e-6;

/// Throws OverlapDetected unless the cell's spheres and all their lattice images are disjoint.
void validateCell(const UnitCell& cell, const Lattice& lattice);

/// Lattice points m with |m - centre| < radius, in lexicographic order of their integer coordinates.
struct TruncationIndex {
  double radius = 0.0;
  std::vector<LatticeIndex> points;

  std::size_t size() const noexcept { return points.size(); }
  std::optional<std::size_t> find(const LatticeIndex& m) const;
};

TruncationIndex latticePoints(const Lattice& lattice, double radius);
/// Variant with the ball centred at an arbitrary point of the lattice span.
TruncationIndex latticePoints(const Lattice& lattice, double radius, const Vec3& centre);

struct PlacedSphere {
  LatticeIndex cell{0, 0, 0};
  int resonator = 0;
  Sphere sphere;
};

/// Resonators of a finite structure in canonical order: lattice point first, then resonator index.
using FiniteStructure = std::vector<PlacedSphere>;

FiniteStructure buildFiniteStructure(const UnitCell& cell, const Lattice& lattice,
                                     const TruncationIndex& index);

/// Throws OverlapDetected if any two spheres are closer than the minimum gap.
void checkDisjoint(const FiniteStructure& structure);

struct SurfaceMesh {
  Sphere sphere;
  int level = 0;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> centroids;
  std::vector<Vec3> normals;
  /// Area of the curved patch of the sphere cut out by each triangle; sums to 4 pi R^2.
  std::vector<double> areas;
  /// Area of the flat triangle itself.
  std::vector<double> flatAreas;

  std::size_t panelCount() const noexcept { return triangles.size(); }
  double totalArea() const;
};

inline constexpr int kMaxMeshLevel = 7;

/// Icosahedron refined `level` times with vertices projected onto the sphere.
SurfaceMesh meshSphere(const Sphere& sphere, int level);

/// 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1aHex(std::string_view bytes);

std::string geometryHash(const UnitCell& cell, const Lattice& lattice);
std::string geometryHash(const FiniteStructure& structure);

}  // namespace capmat
