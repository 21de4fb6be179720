#include "capmat/singlelayer.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <Eigen/Cholesky>

#include "capmat/error.hpp"
#include "capmat/harmonics.hpp"
#include "capmat/panel_integrals.hpp"
#include "capmat/parallel.hpp"

namespace capmat {

namespace {

constexpr double kInvFourPi = 0.25 / std::numbers::pi;
// Columns per right-hand-side chunk; fixed so results do not depend on the thread count.
constexpr Eigen::Index kSolveChunk = 32;

}  // namespace

std::string Backend::name() const {
  if (kind == BackendKind::PanelP0) return "panelP0(level=" + std::to_string(level) + ")";
  return "sphericalMultipole(L=" + std::to_string(order) + ")";
}

int Backend::dofsPerSphere() const {
  if (kind == BackendKind::PanelP0) {
    int n = 20;
    for (int l = 0; l < level; ++l) n *= 4;
    return n;
  }
  return harmonicCount(order);
}

void Backend::validate() const {
  if (kind == BackendKind::PanelP0) {
    require(level >= 0, ErrorKind::InvalidArgument, "panel level must be non-negative");
    require(level <= kMaxMeshLevel, ErrorKind::LevelTooLarge,
            "panel level " + std::to_string(level) + " exceeds " + std::to_string(kMaxMeshLevel));
  } else {
    require(order >= 0, ErrorKind::InvalidArgument, "multipole order must be non-negative");
    require(order <= kMaxMultipoleOrder, ErrorKind::LevelTooLarge,
            "multipole order " + std::to_string(order) + " exceeds " +
                std::to_string(kMaxMultipoleOrder));
  }
}

std::string toString(Provenance p) {
  switch (p) {
    case Provenance::Finite: return "finite";
    case Provenance::TruncatedInfinite: return "truncatedInfinite";
    case Provenance::Generalized: return "generalized";
  }
  return "finite";
}

Provenance provenanceFromString(const std::string& s) {
  if (s == "finite") return Provenance::Finite;
  if (s == "truncatedInfinite") return Provenance::TruncatedInfinite;
  if (s == "generalized") return Provenance::Generalized;
  fail(ErrorKind::InvalidArgument, "unknown provenance '" + s + "'");
}

CouplingTensor::CouplingTensor(int order, double ri, double rj) : order_(order), ri_(ri), rj_(rj) {
  const int nh = harmonicCount(order);
  const int nk = harmonicCount(2 * order);
  start_.resize(static_cast<std::size_t>(nh * nh) + 1);
  std::size_t pos = 0;
  for (int a = 0; a < nh; ++a) {
    for (int b = 0; b < nh; ++b) {
      start_[static_cast<std::size_t>(a * nh + b)] = pos;
      pos += static_cast<std::size_t>(2 * (harmonicDegree(a) + harmonicDegree(b)) + 1);
    }
  }
  start_.back() = pos;
  values_.assign(pos, 0.0);

  // integrand degree in each direction is at most 3L
  const SphereRule rule = sphereRuleForDegree(3 * order);
  const std::size_t np = rule.size();
  std::vector<double> ya(np * static_cast<std::size_t>(nh));
  for (std::size_t p = 0; p < np; ++p)
    realSphericalHarmonics(order, rule.directions[p], std::span(&ya[p * nh], static_cast<std::size_t>(nh)));

  std::vector<double> rk(static_cast<std::size_t>(nk));
  // T(q, a, k) = sum_p w_p Y_a(p) R_k(ri w_p - rj w_q), restricted to degree(k) >= degree(a)
  std::vector<double> t(static_cast<std::size_t>(nh * nk));
  for (std::size_t q = 0; q < np; ++q) {
    std::fill(t.begin(), t.end(), 0.0);
    for (std::size_t p = 0; p < np; ++p) {
      regularSolidHarmonics(2 * order, ri * rule.directions[p] - rj * rule.directions[q], rk);
      const double w = rule.weights[p];
      for (int a = 0; a < nh; ++a) {
        const double wy = w * ya[p * nh + a];
        const int la = harmonicDegree(a);
        double* row = &t[static_cast<std::size_t>(a * nk)];
        for (int k = la * la; k < nk; ++k) row[k] += wy * rk[static_cast<std::size_t>(k)];
      }
    }
    const double wq = rule.weights[q];
    for (int a = 0; a < nh; ++a) {
      const int la = harmonicDegree(a);
      for (int b = 0; b < nh; ++b) {
        const int n = la + harmonicDegree(b);
        const double wy = wq * ya[q * nh + b];
        double* out = &values_[start_[static_cast<std::size_t>(a * nh + b)]];
        const double* row = &t[static_cast<std::size_t>(a * nk + n * n)];
        for (int m = 0; m < 2 * n + 1; ++m) out[m] += wy * row[m];
      }
    }
  }
}

template <class Scalar>
void CouplingTensor::contract(const Scalar* h, Scalar* block, Eigen::Index ld) const {
  const int nh = harmonicCount(order_);
  const double scale = ri_ * rj_;
  for (int b = 0; b < nh; ++b) {
    const int lb = harmonicDegree(b);
    for (int a = 0; a < nh; ++a) {
      const int n = harmonicDegree(a) + lb;
      const double* j = &values_[start_[static_cast<std::size_t>(a * nh + b)]];
      const Scalar* hk = h + n * n;
      Scalar s{};
      for (int m = 0; m < 2 * n + 1; ++m) s += hk[m] * j[m];
      block[a + b * ld] = scale * s;
    }
  }
}

template void CouplingTensor::contract<double>(const double*, double*, Eigen::Index) const;
template void CouplingTensor::contract<std::complex<double>>(const std::complex<double>*,
                                                             std::complex<double>*,
                                                             Eigen::Index) const;

std::shared_ptr<const CouplingTensor> couplingTensor(int order, double ri, double rj) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const CouplingTensor>> cache;
  const auto key = std::make_tuple(order, ri, rj);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto tensor = std::make_shared<const CouplingTensor>(order, ri, rj);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, tensor).first->second;
}

void freeSpaceTranslation(int order, const Vec3& t, double* h) {
  const int degree = 2 * order;
  const int nk = harmonicCount(degree);
  irregularSolidHarmonics(degree, t, std::span(h, static_cast<std::size_t>(nk)));
  for (int n = 0; n <= degree; ++n) {
    const double c = ((n % 2 == 0) ? 1.0 : -1.0) / (2.0 * n + 1.0);
    for (int m = -n; m <= n; ++m) h[harmonicIndex(n, m)] *= c;
  }
}

namespace {

void assembleMultipole(const std::vector<Sphere>& spheres, int order, DiscreteSingleLayer& out) {
  const int nk = harmonicCount(2 * order);
  const std::size_t ns = spheres.size();
  out.op.setZero(static_cast<Eigen::Index>(out.dofCount()), static_cast<Eigen::Index>(out.dofCount()));
  out.loads.setZero(out.op.rows(), static_cast<Eigen::Index>(ns));
  out.loadScale = 4.0 * std::numbers::pi;
  for (std::size_t s = 0; s < ns; ++s) {
    const auto o = static_cast<Eigen::Index>(out.offsets[s]);
    out.loads(o, static_cast<Eigen::Index>(s)) = spheres[s].radius;
    for (int l = 0; l <= order; ++l)
      for (int m = -l; m <= l; ++m) {
        const Eigen::Index k = o + harmonicIndex(l, m);
        out.op(k, k) = spheres[s].radius / (2.0 * l + 1.0);
      }
  }
  // upper block triangle by columns j, mirrored afterwards
  parallelFor(ns, [&](std::size_t j) {
    std::vector<double> h(static_cast<std::size_t>(nk));
    for (std::size_t i = 0; i < j; ++i) {
      const auto tensor = couplingTensor(order, spheres[i].radius, spheres[j].radius);
      freeSpaceTranslation(order, spheres[i].center - spheres[j].center, h.data());
      double* block = &out.op(static_cast<Eigen::Index>(out.offsets[i]),
                              static_cast<Eigen::Index>(out.offsets[j]));
      tensor->contract(h.data(), block, out.op.rows());
    }
  });
  out.op.triangularView<Eigen::StrictlyLower>() = out.op.transpose();
}

double panelDiameter(const SurfaceMesh& mesh, std::size_t p) {
  const auto& t = mesh.triangles[p];
  const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
  const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
  const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
  return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
}

void assemblePanels(const std::vector<Sphere>& spheres, int level, DiscreteSingleLayer& out) {
  const std::size_t ns = spheres.size();
  std::vector<SurfaceMesh> meshes;
  meshes.reserve(ns);
  for (const auto& s : spheres) meshes.push_back(meshSphere(s, level));
  const auto n = static_cast<Eigen::Index>(out.dofCount());
  out.op.setZero(n, n);
  out.loads.setZero(n, static_cast<Eigen::Index>(ns));
  out.loadScale = 1.0;
  double diameter = 0.0;
  for (std::size_t p = 0; p < meshes[0].panelCount(); ++p)
    diameter = std::max(diameter, panelDiameter(meshes[0], p));
  for (std::size_t s = 1; s < ns; ++s)
    for (std::size_t p = 0; p < meshes[s].panelCount(); ++p)
      diameter = std::max(diameter, panelDiameter(meshes[s], p));
  const double nearDistance = 2.0 * diameter;

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t p = 0; p < meshes[s].panelCount(); ++p)
      out.loads(static_cast<Eigen::Index>(out.offsets[s] + p), static_cast<Eigen::Index>(s)) =
          meshes[s].areas[p];

  // rows: target panel p on sphere i; columns: source panel q on sphere j
  parallelFor(ns * ns, [&](std::size_t pair) {
    const std::size_t i = pair / ns;
    const std::size_t j = pair % ns;
    const SurfaceMesh& mi = meshes[i];
    const SurfaceMesh& mj = meshes[j];
    const double gap = (spheres[i].center - spheres[j].center).norm() - spheres[i].radius -
                       spheres[j].radius;
    const bool anyNear = i == j || gap < nearDistance;
    for (std::size_t q = 0; q < mj.panelCount(); ++q) {
      const auto col = static_cast<Eigen::Index>(out.offsets[j] + q);
      const auto& tq = mj.triangles[q];
      for (std::size_t p = 0; p < mi.panelCount(); ++p) {
        const auto row = static_cast<Eigen::Index>(out.offsets[i] + p);
        const double dist = (mi.centroids[p] - mj.centroids[q]).norm();
        double value;
        if (anyNear && dist < nearDistance) {
          // flat-panel integral rescaled to the curved patch area
          value = trianglePotential(mj.vertices[static_cast<std::size_t>(tq[0])],
                                    mj.vertices[static_cast<std::size_t>(tq[1])],
                                    mj.vertices[static_cast<std::size_t>(tq[2])], mi.centroids[p]) *
                  (mj.areas[q] / mj.flatAreas[q]);
        } else {
          value = mj.areas[q] / dist;
        }
        out.op(row, col) = mi.areas[p] * kInvFourPi * value;
      }
    }
  });
  const Eigen::MatrixXd sym = 0.5 * (out.op + out.op.transpose());
  out.op = sym;
}

std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> factorize(const DiscreteSingleLayer& op) {
  if (op.factor) return op.factor;
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(op.op);
  if (llt->info() != Eigen::Success)
    fail(ErrorKind::IllConditioned, "single layer operator is not numerically positive definite");
  const double rcond = llt->rcond();
  if (!(rcond > 1.0 / kMaxConditionNumber))
    fail(ErrorKind::IllConditioned,
         "single layer condition estimate exceeds " + std::to_string(kMaxConditionNumber));
  return llt;
}

Eigen::MatrixXd solveColumns(const std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>>& factor,
                             const Eigen::MatrixXd& rhs) {
  const auto& llt = *factor;
  Eigen::MatrixXd x(rhs.rows(), rhs.cols());
  const Eigen::Index chunks = (rhs.cols() + kSolveChunk - 1) / kSolveChunk;
  parallelFor(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kSolveChunk;
    const Eigen::Index width = std::min(kSolveChunk, rhs.cols() - begin);
    x.middleCols(begin, width) = llt.solve(rhs.middleCols(begin, width));
  });
  return x;
}

}  // namespace

DiscreteSingleLayer assembleFreeSpace(const std::vector<Sphere>& spheres, const Backend& backend) {
  backend.validate();
  require(!spheres.empty(), ErrorKind::InvalidArgument, "no spheres to discretize");
  FiniteStructure structure;
  structure.reserve(spheres.size());
  for (const auto& s : spheres) structure.push_back(PlacedSphere{{0, 0, 0}, 0, s});
  checkDisjoint(structure);

  DiscreteSingleLayer out;
  out.backend = backend;
  const auto per = static_cast<std::size_t>(backend.dofsPerSphere());
  out.offsets.resize(spheres.size() + 1);
  for (std::size_t s = 0; s <= spheres.size(); ++s) out.offsets[s] = s * per;
  if (backend.kind == BackendKind::SphericalMultipole)
    assembleMultipole(spheres, backend.order, out);
  else
    assemblePanels(spheres, backend.level, out);
  return out;
}

DiscreteSingleLayer assembleSingleLayer(const std::vector<Sphere>& spheres, const Backend& backend) {
  DiscreteSingleLayer out = assembleFreeSpace(spheres, backend);
  out.factor = factorize(out);
  out.conditionEstimate = 1.0 / out.factor->rcond();
  return out;
}

DiscreteSingleLayer assembleSingleLayer(const FiniteStructure& structure, const Backend& backend) {
  std::vector<Sphere> spheres;
  spheres.reserve(structure.size());
  for (const auto& p : structure) spheres.push_back(p.sphere);
  return assembleSingleLayer(spheres, backend);
}

std::vector<BoundaryDensity> solveDensities(const DiscreteSingleLayer& op,
                                            const std::vector<std::size_t>& targets) {
  Eigen::MatrixXd rhs(op.loads.rows(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    require(targets[k] < op.sphereCount(), ErrorKind::InvalidArgument, "target sphere out of range");
    rhs.col(static_cast<Eigen::Index>(k)) = op.loads.col(static_cast<Eigen::Index>(targets[k]));
  }
  const Eigen::MatrixXd x = solveColumns(factorize(op), rhs);
  std::vector<BoundaryDensity> out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k)
    out[k].coefficients = x.col(static_cast<Eigen::Index>(k));
  return out;
}

Eigen::MatrixXd capacitanceOf(const DiscreteSingleLayer& op) {
  const Eigen::MatrixXd x = solveColumns(factorize(op), op.loads);
  Eigen::MatrixXd c = op.loadScale * (op.loads.transpose() * x);
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd capacitanceOf(const std::vector<Sphere>& spheres, const Backend& backend) {
  return capacitanceOf(assembleSingleLayer(spheres, backend));
}

CapacitanceBlocks finiteCapacitance(const UnitCell& cell, const Lattice& lattice,
                                    const TruncationIndex& index, const Backend& backend) {
  require(index.size() > 0, ErrorKind::InvalidArgument, "empty truncation index");
  const FiniteStructure structure = buildFiniteStructure(cell, lattice, index);
  CapacitanceBlocks out;
  out.blockIndex = index.points;
  out.N = static_cast<int>(cell.size());
  out.entries = capacitanceOf(assembleSingleLayer(structure, backend));
  out.provenance = Provenance::Finite;
  out.geometryHash = geometryHash(structure);
  return out;
}

CapacitanceBlocks finiteCapacitance(const UnitCell& cell, const Lattice& lattice, double r,
                                    const Backend& backend) {
  return finiteCapacitance(cell, lattice, latticePoints(lattice, r), backend);
}

}  // namespace capmat
