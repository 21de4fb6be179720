#include "capmat/latticegreen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "capmat/error.hpp"
#include "capmat/harmonics.hpp"
#include "capmat/parallel.hpp"

namespace capmat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInvFourPi = 0.25 / kPi;
// projection sphere radius relative to the distance of the nearest singular image
constexpr double kProjectionFraction = 0.3;
// latitudes beyond the order L for the projection rule (aliasing below 1e-12 at fraction 0.3)
constexpr int kProjectionExtra = 13;

double nearestImageDistance(const Lattice& lattice, const Vec3& t) {
  double longest = 0.0;
  for (int k = 0; k < lattice.dimension(); ++k) longest = std::max(longest, lattice.generator(k).norm());
  const TruncationIndex idx = latticePoints(lattice, 2.0 * t.norm() + 2.0 * longest + 1e-9);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : idx.points) {
    if (m == LatticeIndex{0, 0, 0}) continue;
    best = std::min(best, (t - lattice.position(m)).norm());
  }
  return best;
}

std::vector<Sphere> sphereList(const UnitCell& cell) { return cell.spheres; }

}  // namespace

QuasiCapacitanceEvaluator::QuasiCapacitanceEvaluator(UnitCell cell, Lattice lattice, Backend backend,
                                                     LatticeSumScheme scheme)
    : cell_(std::move(cell)), lattice_(std::move(lattice)), backend_(backend), scheme_(scheme) {
  validateCell(cell_, lattice_);
  free_ = assembleFreeSpace(sphereList(cell_), backend_);
  const std::size_t n = cell_.size();
  if (backend_.kind == BackendKind::SphericalMultipole) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        PairData p;
        p.i = i;
        p.j = j;
        p.t = cell_.spheres[i].center - cell_.spheres[j].center;
        p.rho = kProjectionFraction * nearestImageDistance(lattice_, p.t);
        pairs_.push_back(p);
      }
    projection_ = sphereRule(backend_.order + kProjectionExtra);
    const int nk = harmonicCount(2 * backend_.order);
    projectionHarmonics_.resize(projection_.size() * static_cast<std::size_t>(nk));
    for (std::size_t p = 0; p < projection_.size(); ++p)
      realSphericalHarmonics(2 * backend_.order, projection_.directions[p],
                             std::span(&projectionHarmonics_[p * static_cast<std::size_t>(nk)],
                                       static_cast<std::size_t>(nk)));
  } else {
    for (const auto& s : cell_.spheres) meshes_.push_back(meshSphere(s, backend_.level));
  }
}

template <class RegularFn>
void QuasiCapacitanceEvaluator::addRemainder(RegularFn&& regular, QuasiSingleLayer::Matrix& op) const {
  if (backend_.kind == BackendKind::SphericalMultipole) {
    const int order = backend_.order;
    const int nh = harmonicCount(order);
    const int nk = harmonicCount(2 * order);
    std::vector<cdouble> values(projection_.size());
    std::vector<cdouble> h(static_cast<std::size_t>(nk));
    for (const auto& pair : pairs_) {
      for (std::size_t p = 0; p < projection_.size(); ++p)
        values[p] = regular(Vec3(pair.t + pair.rho * projection_.directions[p]));
      std::fill(h.begin(), h.end(), cdouble(0.0));
      for (std::size_t p = 0; p < projection_.size(); ++p) {
        const cdouble wv = projection_.weights[p] * values[p];
        const double* y = &projectionHarmonics_[p * static_cast<std::size_t>(nk)];
        for (int k = 0; k < nk; ++k) h[static_cast<std::size_t>(k)] += wv * y[k];
      }
      double rn = 1.0;
      for (int deg = 0; deg <= 2 * order; ++deg) {
        for (int m = -deg; m <= deg; ++m) h[static_cast<std::size_t>(harmonicIndex(deg, m))] /= rn;
        rn *= pair.rho;
      }
      const auto tensor =
          couplingTensor(order, cell_.spheres[pair.i].radius, cell_.spheres[pair.j].radius);
      Eigen::MatrixXcd block(nh, nh);
      tensor->contract(h.data(), block.data(), nh);
      const auto oi = static_cast<Eigen::Index>(free_.offsets[pair.i]);
      const auto oj = static_cast<Eigen::Index>(free_.offsets[pair.j]);
      op.block(oi, oj, nh, nh) += block;
      if (pair.i != pair.j) op.block(oj, oi, nh, nh) += block.adjoint();
    }
  } else {
    const std::size_t n = cell_.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const SurfaceMesh& mi = meshes_[i];
        const SurfaceMesh& mj = meshes_[j];
        for (std::size_t q = 0; q < mj.panelCount(); ++q)
          for (std::size_t p = 0; p < mi.panelCount(); ++p)
            op(static_cast<Eigen::Index>(free_.offsets[i] + p),
               static_cast<Eigen::Index>(free_.offsets[j] + q)) +=
                mi.areas[p] * mj.areas[q] * regular(Vec3(mi.centroids[p] - mj.centroids[q]));
      }
  }
  const QuasiSingleLayer::Matrix herm = 0.5 * (op + op.adjoint());
  op = herm;
}

QuasiSingleLayer QuasiCapacitanceEvaluator::singleLayer(const Vec3& alpha) const {
  const QuasiPeriodicGreens g(lattice_, alpha, scheme_);
  QuasiSingleLayer out;
  out.backend = backend_;
  out.offsets = free_.offsets;
  out.loads = free_.loads;
  out.loadScale = free_.loadScale;
  out.op = free_.op.cast<cdouble>();
  addRemainder([&](const Vec3& x) { return g.regular(x); }, out.op);
  auto llt = std::make_shared<Eigen::LLT<QuasiSingleLayer::Matrix>>(out.op);
  if (llt->info() != Eigen::Success)
    fail(ErrorKind::IllConditioned, "quasi-periodic single layer is not numerically positive definite");
  const double rcond = llt->rcond();
  if (!(rcond > 1.0 / kMaxConditionNumber))
    fail(ErrorKind::IllConditioned, "quasi-periodic single layer condition estimate exceeds " +
                                        std::to_string(kMaxConditionNumber));
  out.conditionEstimate = 1.0 / rcond;
  out.factor = std::move(llt);
  return out;
}

Eigen::MatrixXcd capacitanceOf(const QuasiSingleLayer& op) {
  std::shared_ptr<const Eigen::LLT<QuasiSingleLayer::Matrix>> factor = op.factor;
  if (!factor) {
    auto llt = std::make_shared<Eigen::LLT<QuasiSingleLayer::Matrix>>(op.op);
    if (llt->info() != Eigen::Success)
      fail(ErrorKind::IllConditioned, "quasi-periodic single layer is not numerically positive definite");
    factor = std::move(llt);
  }
  const Eigen::MatrixXcd rhs = op.loads.cast<cdouble>();
  const Eigen::MatrixXcd x = factor->solve(rhs);
  const Eigen::MatrixXcd c = op.loadScale * (rhs.transpose() * x);
  return 0.5 * (c + c.adjoint());
}

Eigen::MatrixXcd QuasiCapacitanceEvaluator::capacitance(const Vec3& alpha) const {
  return capacitanceOf(singleLayer(alpha));
}

QuasiCapacitanceSample QuasiCapacitanceEvaluator::sample(const Vec3& alpha) const {
  QuasiCapacitanceSample s;
  s.alpha = alpha;
  s.matrix = capacitance(alpha);
  s.backend = backend_.name();
  s.scheme = scheme_.name();
  return s;
}

std::vector<Eigen::MatrixXcd> QuasiCapacitanceEvaluator::capacitances(const std::vector<Vec3>& alphas) const {
  std::vector<Eigen::MatrixXcd> out(alphas.size());
  parallelFor(alphas.size(), [&](std::size_t k) { out[k] = capacitance(alphas[k]); });
  return out;
}

QuasiSingleLayer quasiSingleLayer(const UnitCell& cell, const Lattice& lattice, const Vec3& alpha,
                                  const Backend& backend, const LatticeSumScheme& scheme) {
  return QuasiCapacitanceEvaluator(cell, lattice, backend, scheme).singleLayer(alpha);
}

QuasiCapacitanceSample quasiCapacitance(const UnitCell& cell, const Lattice& lattice,
                                        const Vec3& alpha, const Backend& backend,
                                        const LatticeSumScheme& scheme) {
  return QuasiCapacitanceEvaluator(cell, lattice, backend, scheme).sample(alpha);
}

Eigen::VectorXd generalizedBandValues(const Eigen::MatrixXcd& c, const MaterialParams& materials) {
  const auto n = static_cast<std::size_t>(c.rows());
  materials.validate(n);
  const std::vector<double> s = materials.scaleFactors();
  Eigen::VectorXd root(c.rows());
  for (Eigen::Index i = 0; i < c.rows(); ++i) root(i) = std::sqrt(s[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXcd m = root.asDiagonal() * c * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::MatrixXd bandFunction(const QuasiCapacitanceEvaluator& evaluator,
                             const MaterialParams& materials, const std::vector<Vec3>& alphas) {
  materials.validate(evaluator.cell().size());
  const auto caps = evaluator.capacitances(alphas);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(alphas.size()),
                      static_cast<Eigen::Index>(evaluator.cell().size()));
  for (std::size_t k = 0; k < alphas.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = generalizedBandValues(caps[k], materials).transpose();
  return out;
}

PeriodicGreensZero::PeriodicGreensZero(const Lattice& lattice, double tolerance) : lattice_(lattice) {
  require(lattice.dimension() == 3, ErrorKind::InvalidArgument,
          "the zero-mode periodic kernel is only defined here for three-dimensional lattices");
  const double scale = lattice.scale();
  splitting_ = std::sqrt(kPi) / scale;
  const double e = splitting_;
  // erfc(u) and exp(-u^2) both fall below the tolerance at u = sqrt(-log(tolerance)) + 1
  const double u = std::sqrt(-std::log(tolerance)) + 1.0;
  Vec3 corner = lattice.generator(0) + lattice.generator(1) + lattice.generator(2);
  const TruncationIndex idx = latticePoints(lattice, u / e + corner.norm());
  for (const auto& m : idx.points) points_.push_back(lattice.position(m));
  const BrillouinZone bz = dualBasis(lattice);
  Lattice dual(3, {bz.duals[0], bz.duals[1], bz.duals[2]});
  const TruncationIndex qs = latticePoints(dual, 2.0 * e * u);
  for (const auto& q : qs.points) {
    if (q == LatticeIndex{0, 0, 0}) continue;
    const Vec3 k = bz.dualPoint(q);
    waves_.push_back(k);
    weights_.push_back(std::exp(-k.squaredNorm() / (4.0 * e * e)) / (k.squaredNorm() * lattice.cellMeasure()));
  }
}

double PeriodicGreensZero::regular(const Vec3& x) const {
  const double e = splitting_;
  double s = 0.0;
  for (const auto& p : points_) {
    const double r = (x - p).norm();
    if (p.isZero(0.0)) {
      const double v = e * r;
      s += v < 1e-3 ? -2.0 * e / std::sqrt(kPi) * (1.0 - v * v / 3.0) : -std::erf(v) / r;
    } else {
      s += std::erfc(e * r) / r;
    }
  }
  s *= kInvFourPi;
  for (std::size_t w = 0; w < waves_.size(); ++w) s += weights_[w] * std::cos(waves_[w].dot(x));
  return s - 1.0 / (4.0 * e * e * lattice_.cellMeasure());
}

double PeriodicGreensZero::operator()(const Vec3& x) const { return regular(x) + kInvFourPi / x.norm(); }

NearGammaRecord nearGammaExpansion(const QuasiCapacitanceEvaluator& evaluator, const Vec3& alpha) {
  const Lattice& lattice = evaluator.lattice();
  require(lattice.dimension() == 3, ErrorKind::InvalidArgument,
          "the near-zone-centre expansion is provided for three-dimensional lattices");
  require(evaluator.backend().kind == BackendKind::SphericalMultipole, ErrorKind::InvalidArgument,
          "the near-zone-centre expansion requires the multipole backend");
  const Vec3 a = lattice.parallelPart(alpha);
  const double an = a.norm();
  require(an > 0.0, ErrorKind::GammaPointRequested, "alpha must be nonzero");
  const BrillouinZone bz = dualBasis(lattice);
  double dualScale = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) dualScale = std::min(dualScale, bz.duals[k].norm());
  require(an < 0.1 * dualScale, ErrorKind::InvalidArgument,
          "alpha must lie within a tenth of the dual lattice scale");

  NearGammaRecord rec;
  rec.alpha = a;
  rec.full = evaluator.singleLayer(a).op;
  const auto n = rec.full.rows();
  const int order = evaluator.backend().order;
  const int nh = harmonicCount(order);
  const double cellMeasure = lattice.cellMeasure();
  const double inv = 1.0 / (cellMeasure * an * an);
  rec.leading = Eigen::MatrixXcd::Zero(n, n);
  rec.linear = Eigen::MatrixXcd::Zero(n, n);
  rec.quadratic = Eigen::MatrixXcd::Zero(n, n);
  // the zero-mode-free periodic kernel has Laplacian 1/|Y|; its |x|^2/(6|Y|) part is integrated
  // directly so that only a harmonic remainder goes through the solid-harmonic projection
  Eigen::MatrixXcd isotropic = Eigen::MatrixXcd::Zero(n, n);

  const auto& spheres = evaluator.cell().spheres;
  const auto& offsets = evaluator.freeOperator().offsets;
  const SphereRule rule = sphereRuleForDegree(order + 2);
  std::vector<double> yv(rule.size() * static_cast<std::size_t>(nh));
  for (std::size_t p = 0; p < rule.size(); ++p)
    realSphericalHarmonics(order, rule.directions[p], std::span(&yv[p * nh], static_cast<std::size_t>(nh)));
  for (std::size_t i = 0; i < spheres.size(); ++i)
    for (std::size_t j = 0; j < spheres.size(); ++j) {
      const double ri = spheres[i].radius;
      const double rj = spheres[j].radius;
      const auto oi = static_cast<Eigen::Index>(offsets[i]);
      const auto oj = static_cast<Eigen::Index>(offsets[j]);
      rec.leading(oi, oj) = 4.0 * kPi * ri * rj * inv;
      for (std::size_t p = 0; p < rule.size(); ++p)
        for (std::size_t q = 0; q < rule.size(); ++q) {
          const Vec3 d = spheres[i].center + ri * rule.directions[p] - spheres[j].center -
                         rj * rule.directions[q];
          const double ad = a.dot(d);
          const double dd = d.squaredNorm() / (6.0 * cellMeasure);
          const double w = rule.weights[p] * rule.weights[q] * ri * rj;
          for (int x = 0; x < nh; ++x)
            for (int y = 0; y < nh; ++y) {
              const double yy = w * yv[p * nh + x] * yv[q * nh + y];
              rec.linear(oi + x, oj + y) += cdouble(0.0, yy * ad * inv);
              rec.quadratic(oi + x, oj + y) += -0.5 * yy * ad * ad * inv;
              isotropic(oi + x, oj + y) += yy * dd;
            }
        }
    }
  const PeriodicGreensZero g0(lattice, evaluator.scheme().tolerance);
  rec.periodic = evaluator.freeOperator().op.cast<cdouble>();
  evaluator.addRemainder(
      [&](const Vec3& x) { return cdouble(g0.regular(x) - x.squaredNorm() / (6.0 * cellMeasure), 0.0); },
      rec.periodic);
  rec.periodic += isotropic;
  rec.residual = (rec.full - rec.leading - rec.linear - rec.quadratic - rec.periodic).norm();
  return rec;
}

}  // namespace capmat
