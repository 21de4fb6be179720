#include "capmat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>

#include <Eigen/Dense>

#include "capmat/error.hpp"

namespace capmat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::MatrixXd gram(const std::vector<Vec3>& g) {
  const auto d = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd G(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) G(i, j) = g[i].dot(g[j]);
  return G;
}

std::string formatIndex(const LatticeIndex& m) {
  std::ostringstream os;
  os << "(" << m[0] << "," << m[1] << "," << m[2] << ")";
  return os.str();
}

}  // namespace

Lattice::Lattice(int dimension, std::vector<Vec3> generators)
    : dim_(dimension), generators_(std::move(generators)) {
  require(dim_ >= 1 && dim_ <= 3, ErrorKind::InvalidArgument,
          "lattice dimension must be 1, 2 or 3");
  require(static_cast<int>(generators_.size()) == dim_, ErrorKind::InvalidArgument,
          "expected one generator per lattice dimension");
  double longest = 0.0;
  for (const auto& g : generators_) {
    require(g.allFinite(), ErrorKind::InvalidArgument, "non-finite lattice generator");
    longest = std::max(longest, g.norm());
  }
  require(longest > 0.0, ErrorKind::DegenerateLattice, "zero lattice generator");

  const double det = gram(generators_).determinant();
  require(det > 1e-12 * std::pow(longest, 2 * dim_), ErrorKind::DegenerateLattice,
          "lattice generators are numerically dependent");
  measure_ = std::sqrt(det);
  scale_ = std::pow(measure_, 1.0 / dim_);

  // Gram-Schmidt on the generators, completed with coordinate axes.
  std::vector<Vec3> candidates(generators_.begin(), generators_.end());
  candidates.push_back(Vec3::UnitX());
  candidates.push_back(Vec3::UnitY());
  candidates.push_back(Vec3::UnitZ());
  int filled = 0;
  for (const auto& c : candidates) {
    if (filled == 3) break;
    Vec3 v = c;
    for (int k = 0; k < filled; ++k) v -= frame_[k].dot(v) * frame_[k];
    if (v.norm() > 1e-8 * c.norm()) frame_[filled++] = v.normalized();
  }
}

Lattice Lattice::chain(double spacing) { return axisAligned(1, spacing); }
Lattice Lattice::square(double spacing) { return axisAligned(2, spacing); }
Lattice Lattice::cubic(double spacing) { return axisAligned(3, spacing); }

Lattice Lattice::axisAligned(int dimension, double spacing) {
  require(spacing > 0.0, ErrorKind::InvalidArgument, "lattice spacing must be positive");
  std::vector<Vec3> g;
  for (int k = 0; k < dimension; ++k) g.push_back(spacing * Vec3::Unit(k));
  return Lattice(dimension, std::move(g));
}

Vec3 Lattice::position(const LatticeIndex& m) const {
  Vec3 p = Vec3::Zero();
  for (int k = 0; k < dim_; ++k) p += m[k] * generators_[k];
  return p;
}

Vec3 Lattice::parallelPart(const Vec3& x) const {
  Vec3 p = Vec3::Zero();
  for (int k = 0; k < dim_; ++k) p += frame_[k].dot(x) * frame_[k];
  return p;
}

std::array<double, 3> BrillouinZone::fractional(const Vec3& alpha) const {
  // duals are biorthogonal to the generators; recover coordinates via the dual Gram matrix.
  std::array<double, 3> s{0.0, 0.0, 0.0};
  Eigen::MatrixXd G(dimension, dimension);
  Eigen::VectorXd rhs(dimension);
  for (int i = 0; i < dimension; ++i) {
    rhs(i) = duals[i].dot(alpha);
    for (int j = 0; j < dimension; ++j) G(i, j) = duals[i].dot(duals[j]);
  }
  const Eigen::VectorXd c = G.ldlt().solve(rhs);
  for (int i = 0; i < dimension; ++i) s[i] = c(i);
  return s;
}

Vec3 BrillouinZone::fromFractional(const std::array<double, 3>& s) const {
  Vec3 a = Vec3::Zero();
  for (int i = 0; i < dimension; ++i) a += s[i] * duals[i];
  return a;
}

Vec3 BrillouinZone::reduce(const Vec3& alpha) const {
  auto s = fractional(alpha);
  for (int i = 0; i < dimension; ++i) s[i] -= std::floor(s[i] + 0.5);
  return fromFractional(s);
}

Vec3 BrillouinZone::dualPoint(const LatticeIndex& q) const {
  Vec3 a = Vec3::Zero();
  for (int i = 0; i < dimension; ++i) a += q[i] * duals[i];
  return a;
}

BrillouinZone dualBasis(const Lattice& lattice) {
  const int d = lattice.dimension();
  std::vector<Vec3> g;
  for (int k = 0; k < d; ++k) g.push_back(lattice.generator(k));
  const Eigen::MatrixXd Ginv = gram(g).inverse();
  BrillouinZone bz;
  bz.dimension = d;
  for (int i = 0; i < d; ++i) {
    Vec3 a = Vec3::Zero();
    for (int j = 0; j < d; ++j) a += kTwoPi * Ginv(i, j) * g[j];
    bz.duals[i] = a;
  }
  bz.volume = std::pow(kTwoPi, d) / lattice.cellMeasure();
  return bz;
}

double Sphere::volume() const { return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius; }
double Sphere::area() const { return 4.0 * std::numbers::pi * radius * radius; }

std::vector<double> UnitCell::volumes() const {
  std::vector<double> v;
  v.reserve(spheres.size());
  for (const auto& s : spheres) v.push_back(s.volume());
  return v;
}

std::optional<std::size_t> TruncationIndex::find(const LatticeIndex& m) const {
  auto it = std::lower_bound(points.begin(), points.end(), m);
  if (it == points.end() || *it != m) return std::nullopt;
  return static_cast<std::size_t>(it - points.begin());
}

TruncationIndex latticePoints(const Lattice& lattice, double radius) {
  return latticePoints(lattice, radius, Vec3::Zero());
}

TruncationIndex latticePoints(const Lattice& lattice, double radius, const Vec3& centre) {
  require(radius > 0.0 && std::isfinite(radius), ErrorKind::InvalidArgument,
          "truncation radius must be positive");
  const int d = lattice.dimension();
  const BrillouinZone bz = dualBasis(lattice);
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};
  for (int k = 0; k < d; ++k) {
    const double c = centre.dot(bz.duals[k]) / kTwoPi;
    const double w = radius * bz.duals[k].norm() / kTwoPi;
    lo[k] = static_cast<int>(std::floor(c - w)) - 1;
    hi[k] = static_cast<int>(std::ceil(c + w)) + 1;
  }
  // Points within 1e-12 relative of the sphere |m - centre| = r count as on the boundary (excluded).
  const double r2 = radius * radius * (1.0 - 1e-12);
  TruncationIndex index;
  index.radius = radius;
  LatticeIndex m{0, 0, 0};
  for (m[0] = lo[0]; m[0] <= hi[0]; ++m[0])
    for (m[1] = lo[1]; m[1] <= hi[1]; ++m[1])
      for (m[2] = lo[2]; m[2] <= hi[2]; ++m[2])
        if ((lattice.position(m) - centre).squaredNorm() < r2) index.points.push_back(m);
  return index;
}

void validateCell(const UnitCell& cell, const Lattice& lattice) {
  require(!cell.spheres.empty(), ErrorKind::InvalidArgument, "unit cell has no resonators");
  double maxRadius = 0.0;
  double spread = 0.0;
  for (const auto& s : cell.spheres) {
    require(s.radius > 0.0 && std::isfinite(s.radius), ErrorKind::InvalidArgument,
            "sphere radius must be positive");
    require(s.center.allFinite(), ErrorKind::InvalidArgument, "non-finite sphere centre");
    maxRadius = std::max(maxRadius, s.radius);
    for (const auto& t : cell.spheres) spread = std::max(spread, (s.center - t.center).norm());
  }
  const double reach = spread + 2.0 * maxRadius * (1.0 + kMinimumRelativeGap) + 1e-9 * lattice.scale();
  const TruncationIndex nearby = latticePoints(lattice, reach);
  const std::size_t n = cell.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto& a = cell.spheres[i];
      const auto& b = cell.spheres[j];
      const double needed =
          a.radius + b.radius + kMinimumRelativeGap * std::min(a.radius, b.radius);
      for (const auto& m : nearby.points) {
        if (i == j && m == LatticeIndex{0, 0, 0}) continue;
        const double dist = (a.center - b.center - lattice.position(m)).norm();
        if (dist < needed) {
          fail(ErrorKind::OverlapDetected,
               "resonators " + std::to_string(i) + " and " + std::to_string(j) +
                   " intersect under translation " + formatIndex(m));
        }
      }
    }
  }
}

FiniteStructure buildFiniteStructure(const UnitCell& cell, const Lattice& lattice,
                                     const TruncationIndex& index) {
  validateCell(cell, lattice);
  FiniteStructure structure;
  structure.reserve(index.size() * cell.size());
  for (const auto& m : index.points) {
    const Vec3 shift = lattice.position(m);
    for (std::size_t i = 0; i < cell.size(); ++i) {
      PlacedSphere p;
      p.cell = m;
      p.resonator = static_cast<int>(i);
      p.sphere = Sphere{cell.spheres[i].center + shift, cell.spheres[i].radius};
      structure.push_back(p);
    }
  }
  return structure;
}

void checkDisjoint(const FiniteStructure& structure) {
  for (std::size_t i = 0; i < structure.size(); ++i) {
    const auto& a = structure[i].sphere;
    require(a.radius > 0.0, ErrorKind::InvalidArgument, "sphere radius must be positive");
    for (std::size_t j = i + 1; j < structure.size(); ++j) {
      const auto& b = structure[j].sphere;
      const double needed =
          a.radius + b.radius + kMinimumRelativeGap * std::min(a.radius, b.radius);
      if ((a.center - b.center).squaredNorm() < needed * needed) {
        fail(ErrorKind::OverlapDetected,
             "spheres " + std::to_string(i) + " and " + std::to_string(j) + " intersect");
      }
    }
  }
}

double SurfaceMesh::totalArea() const {
  double a = 0.0;
  for (double x : areas) a += x;
  return a;
}

SurfaceMesh meshSphere(const Sphere& sphere, int level) {
  require(level >= 0, ErrorKind::InvalidArgument, "mesh level must be non-negative");
  require(level <= kMaxMeshLevel, ErrorKind::LevelTooLarge,
          "mesh level " + std::to_string(level) + " exceeds " + std::to_string(kMaxMeshLevel));
  require(sphere.radius > 0.0, ErrorKind::InvalidArgument, "sphere radius must be positive");

  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> tri = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tri.size() * 4);
    for (const auto& t : tri) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tri = std::move(next);
  }

  SurfaceMesh mesh;
  mesh.sphere = sphere;
  mesh.level = level;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(sphere.center + sphere.radius * p);
  for (auto t : tri) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = (b - a).cross(c - a);
    const Vec3 centroid = (a + b + c) / 3.0;
    if (n.dot(centroid - sphere.center) < 0.0) {
      std::swap(t[1], t[2]);
      n = -n;
    }
    // solid angle of the spherical triangle (Van Oosterom-Strackee)
    const Vec3 ua = v[static_cast<std::size_t>(t[0])];
    const Vec3 ub = v[static_cast<std::size_t>(t[1])];
    const Vec3 uc = v[static_cast<std::size_t>(t[2])];
    const double omega = 2.0 * std::atan2(std::abs(ua.dot(ub.cross(uc))),
                                          1.0 + ua.dot(ub) + ub.dot(uc) + uc.dot(ua));
    mesh.triangles.push_back(t);
    mesh.centroids.push_back(centroid);
    mesh.flatAreas.push_back(0.5 * n.norm());
    mesh.areas.push_back(omega * sphere.radius * sphere.radius);
    mesh.normals.push_back(n.normalized());
  }
  return mesh;
}

}  // namespace capmat

namespace capmat {

namespace {

void appendNumber(std::string& s, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g,", x);
  s += buf;
}

void appendVec(std::string& s, const Vec3& v) {
  for (int k = 0; k < 3; ++k) appendNumber(s, v[k]);
}

}  // namespace

std::string fnv1aHex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string geometryHash(const UnitCell& cell, const Lattice& lattice) {
  std::string s = "lattice:" + std::to_string(lattice.dimension()) + ";";
  for (int k = 0; k < lattice.dimension(); ++k) appendVec(s, lattice.generator(k));
  s += "cell:";
  for (const auto& sp : cell.spheres) {
    appendVec(s, sp.center);
    appendNumber(s, sp.radius);
  }
  return fnv1aHex(s);
}

std::string geometryHash(const FiniteStructure& structure) {
  std::string s = "structure:";
  for (const auto& p : structure) {
    appendVec(s, p.sphere.center);
    appendNumber(s, p.sphere.radius);
  }
  return fnv1aHex(s);
}

}  // namespace capmat
