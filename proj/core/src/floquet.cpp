#include "capmat/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>

#include "capmat/error.hpp"
#include "capmat/harmonics.hpp"
#include "capmat/parallel.hpp"

namespace capmat {

namespace {

constexpr double kGrading = 0.5;
constexpr int kPanelOrder = 8;
constexpr double kSmallestPanel = 1e-8;

std::string formatShort(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::size_t flatIndex(const std::array<int, 3>& k, int m, int d) {
  std::size_t idx = 0;
  for (int j = 0; j < d; ++j) idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(k[static_cast<std::size_t>(j)]);
  return idx;
}

}  // namespace

std::string toString(QuadratureKind k) { return k == QuadratureKind::Graded ? "graded" : "uniform"; }

QuadratureKind quadratureKindFromString(const std::string& s) {
  if (s == "uniform") return QuadratureKind::Uniform;
  if (s == "graded") return QuadratureKind::Graded;
  fail(ErrorKind::ConfigInvalid, "unknown quadrature kind '" + s + "'");
}

BZQuadrature BZQuadrature::uniform(const Lattice& lattice, int m) {
  require(m >= 2 && m % 2 == 0, ErrorKind::InvalidArgument,
          "uniform zone grids need an even point count so that no node is the zone centre");
  const BrillouinZone bz = dualBasis(lattice);
  const int d = lattice.dimension();
  BZQuadrature q;
  q.kind = QuadratureKind::Uniform;
  q.dimension = d;
  q.points = m;
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(m);
  q.nodes.resize(total);
  q.weights.assign(total, 1.0 / static_cast<double>(total));
  q.mirror.resize(total);
  std::array<int, 3> k{0, 0, 0};
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int j = d - 1; j >= 0; --j) {
      k[static_cast<std::size_t>(j)] = static_cast<int>(rest % static_cast<std::size_t>(m));
      rest /= static_cast<std::size_t>(m);
    }
    std::array<double, 3> s{0.0, 0.0, 0.0};
    std::array<int, 3> km{0, 0, 0};
    for (int j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      s[uj] = (k[uj] + 0.5) / m - 0.5;
      km[uj] = m - 1 - k[uj];
    }
    q.nodes[idx] = bz.fromFractional(s);
    q.mirror[idx] = flatIndex(km, m, d);
  }
  return q;
}

BZQuadrature BZQuadrature::graded(const Lattice& lattice, int m) {
  require(lattice.dimension() == 1, ErrorKind::InvalidArgument, "graded zone rules are defined for chains only");
  require(m >= 2 && m % 2 == 0, ErrorKind::InvalidArgument, "graded zone rules need an even panel count");
  const BrillouinZone bz = dualBasis(lattice);
  const QuadratureRule1D gl = gaussLegendre(kPanelOrder);
  std::vector<std::pair<double, double>> half;  // (s, w) with s > 0
  auto panel = [&](double a, double b) {
    for (std::size_t k = 0; k < gl.nodes.size(); ++k)
      half.emplace_back(0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k], 0.5 * (b - a) * gl.weights[k]);
  };
  const double w = 1.0 / m;
  double hi = w;
  for (; hi > kSmallestPanel; hi *= kGrading) panel(hi * kGrading, hi);
  // Gauss nodes stay off the endpoint, so the last panel can reach the zone centre
  panel(0.0, hi);
  for (int k = 1; k < m / 2; ++k) panel(k * w, (k + 1) * w);
  std::sort(half.begin(), half.end());

  BZQuadrature q;
  q.kind = QuadratureKind::Graded;
  q.dimension = 1;
  q.points = m;
  const std::size_t h = half.size();
  q.nodes.resize(2 * h);
  q.weights.resize(2 * h);
  q.mirror.resize(2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const auto [s, wt] = half[h - 1 - k];
    q.nodes[k] = -s * bz.duals[0];
    q.weights[k] = wt;
    q.mirror[k] = 2 * h - 1 - k;
    q.nodes[2 * h - 1 - k] = s * bz.duals[0];
    q.weights[2 * h - 1 - k] = wt;
    q.mirror[2 * h - 1 - k] = k;
  }
  return q;
}

BZQuadrature BZQuadrature::refined(const Lattice& lattice) const {
  return kind == QuadratureKind::Graded ? graded(lattice, 2 * points) : uniform(lattice, 2 * points);
}

BZQuadrature BZQuadrature::standard(const Lattice& lattice, int m) {
  return lattice.dimension() == 1 ? graded(lattice, m) : uniform(lattice, m);
}

QuasiCapacitanceGrid sampleGrid(const QuasiCapacitanceEvaluator& evaluator, const BZQuadrature& quad) {
  std::vector<std::size_t> reps;
  for (std::size_t k = 0; k < quad.size(); ++k)
    if (k <= quad.mirror[k]) reps.push_back(k);
  std::vector<Eigen::MatrixXcd> values(reps.size());
  parallelFor(reps.size(), [&](std::size_t r) { values[r] = evaluator.capacitance(quad.nodes[reps[r]]); });
  QuasiCapacitanceGrid grid;
  grid.quadrature = quad;
  grid.matrices.resize(quad.size());
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const std::size_t k = reps[r];
    grid.matrices[quad.mirror[k]] = values[r].conjugate();
    grid.matrices[k] = std::move(values[r]);
  }
  return grid;
}

std::optional<std::size_t> RealSpaceCoefficients::find(const LatticeIndex& m) const {
  const auto it = std::find(points.begin(), points.end(), m);
  if (it == points.end()) return std::nullopt;
  return static_cast<std::size_t>(it - points.begin());
}

const Eigen::MatrixXd& RealSpaceCoefficients::at(const LatticeIndex& m) const {
  const auto k = find(m);
  if (!k)
    fail(ErrorKind::MissingCoefficient, "real-space coefficient for lattice point (" + std::to_string(m[0]) + "," +
                                            std::to_string(m[1]) + "," + std::to_string(m[2]) + ") was not computed");
  return matrices[*k];
}

RealSpaceCoefficients inverseFloquet(const Lattice& lattice, const QuasiCapacitanceGrid& grid,
                                     const std::vector<LatticeIndex>& points) {
  const auto& quad = grid.quadrature;
  require(!grid.matrices.empty() && grid.matrices.size() == quad.size(), ErrorKind::LengthMismatch,
          "quasi-periodic samples do not match the quadrature");
  const auto n = grid.matrices.front().rows();
  RealSpaceCoefficients out;
  out.N = static_cast<int>(n);
  out.points = points;
  out.quadratureKind = quad.kind;
  out.quadraturePoints = quad.points;
  out.matrices.resize(points.size());
  std::vector<double> residue(points.size(), 0.0);
  parallelFor(points.size(), [&](std::size_t p) {
    const Vec3 x = lattice.position(points[p]);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t k = 0; k < quad.size(); ++k)
      acc += (quad.weights[k] * std::exp(cdouble(0.0, -quad.nodes[k].dot(x)))) * grid.matrices[k];
    out.matrices[p] = acc.real();
    residue[p] = acc.imag().cwiseAbs().maxCoeff();
  });
  double scale = 0.0;
  for (const auto& m : out.matrices) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  for (double r : residue) out.imaginaryResidue = std::max(out.imaginaryResidue, scale > 0.0 ? r / scale : r);
  require(out.imaginaryResidue < 1e-10, ErrorKind::IllConditioned,
          "real-space coefficients have a non-negligible imaginary part");

  std::map<double, double> byDistance;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double dist = std::sqrt(double(points[p][0]) * points[p][0] + double(points[p][1]) * points[p][1] +
                                  double(points[p][2]) * points[p][2]);
    if (dist == 0.0) continue;
    const double v = out.matrices[p].cwiseAbs().maxCoeff();
    auto& slot = byDistance[dist];
    slot = std::max(slot, v);
  }
  if (byDistance.size() >= 4) {
    std::vector<double> r, e;
    for (const auto& [dist, v] : byDistance) {
      if (!(v > 0.0)) continue;
      r.push_back(dist);
      e.push_back(v);
    }
    if (r.size() >= 4) out.decay = fitRate(r, e);
  }
  return out;
}

RealSpaceCoefficients realSpaceFromGrids(const Lattice& lattice, const QuasiCapacitanceGrid& coarseGrid,
                                         const QuasiCapacitanceGrid* fineGrid, const std::vector<LatticeIndex>& points,
                                         const FloquetOptions& options) {
  RealSpaceCoefficients coarse = inverseFloquet(lattice, coarseGrid, points);
  if (!fineGrid) return coarse;
  RealSpaceCoefficients out = inverseFloquet(lattice, *fineGrid, points);
  double delta = 0.0;
  double scale = 0.0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    delta = std::max(delta, (out.matrices[p] - coarse.matrices[p]).cwiseAbs().maxCoeff());
    if (points[p] == LatticeIndex{0, 0, 0}) scale = out.matrices[p].cwiseAbs().maxCoeff();
  }
  if (scale == 0.0)
    for (const auto& m : out.matrices) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  out.convergenceDelta = delta;
  if (delta > options.tolerance * scale)
    fail(ErrorKind::QuadratureUnconverged,
         "doubling the zone grid from " + std::to_string(coarseGrid.quadrature.points) + " changed a coefficient by " +
             formatShort(delta) + " (allowed " + formatShort(options.tolerance * scale) + ")");
  if (options.extrapolate && coarseGrid.quadrature.kind == QuadratureKind::Uniform && lattice.dimension() == 2) {
    for (std::size_t p = 0; p < points.size(); ++p)
      out.matrices[p] += (out.matrices[p] - coarse.matrices[p]) / 7.0;
    out.extrapolated = true;
  }
  return out;
}

RealSpaceCoefficients realSpaceCapacitance(const QuasiCapacitanceEvaluator& evaluator,
                                           const std::vector<LatticeIndex>& points, const BZQuadrature& quad,
                                           const FloquetOptions& options) {
  const Lattice& lattice = evaluator.lattice();
  const QuasiCapacitanceGrid coarse = sampleGrid(evaluator, quad);
  if (!options.checkConvergence) return realSpaceFromGrids(lattice, coarse, nullptr, points, options);
  const QuasiCapacitanceGrid fine = sampleGrid(evaluator, quad.refined(lattice));
  return realSpaceFromGrids(lattice, coarse, &fine, points, options);
}

std::vector<LatticeIndex> differenceSet(const TruncationIndex& index) {
  std::set<LatticeIndex> diffs;
  for (const auto& m : index.points)
    for (const auto& n : index.points) diffs.insert({m[0] - n[0], m[1] - n[1], m[2] - n[2]});
  return {diffs.begin(), diffs.end()};
}

CapacitanceBlocks truncatedMatrix(const RealSpaceCoefficients& coeffs, const TruncationIndex& index,
                                  const std::string& geometryHash) {
  const int n = coeffs.N;
  const auto cells = index.size();
  CapacitanceBlocks out;
  out.blockIndex = index.points;
  out.N = n;
  out.provenance = Provenance::TruncatedInfinite;
  out.geometryHash = geometryHash;
  out.entries.resize(static_cast<Eigen::Index>(cells) * n, static_cast<Eigen::Index>(cells) * n);
  for (std::size_t a = 0; a < cells; ++a)
    for (std::size_t b = 0; b < cells; ++b) {
      const auto& m = index.points[a];
      const auto& k = index.points[b];
      const Eigen::MatrixXd& c = coeffs.at({k[0] - m[0], k[1] - m[1], k[2] - m[2]});
      out.entries.block(static_cast<Eigen::Index>(a) * n, static_cast<Eigen::Index>(b) * n, n, n) = c;
    }
  const Eigen::MatrixXd sym = 0.5 * (out.entries + out.entries.transpose());
  out.entries = sym;
  return out;
}

std::vector<Eigen::VectorXcd> truncatedFloquetTransform(const Eigen::VectorXd& u, const TruncationIndex& index,
                                                        int N, const Lattice& lattice,
                                                        const std::vector<Vec3>& alphas) {
  require(N >= 1 && u.size() == static_cast<Eigen::Index>(index.size()) * N, ErrorKind::LengthMismatch,
          "vector length " + std::to_string(u.size()) + " does not match " + std::to_string(index.size()) +
              " cells of " + std::to_string(N) + " resonators");
  std::vector<Vec3> pos(index.size());
  for (std::size_t m = 0; m < index.size(); ++m) pos[m] = lattice.position(index.points[m]);
  std::vector<Eigen::VectorXcd> out(alphas.size());
  parallelFor(alphas.size(), [&](std::size_t k) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(N);
    for (std::size_t m = 0; m < index.size(); ++m)
      acc += std::exp(cdouble(0.0, alphas[k].dot(pos[m]))) * u.segment(static_cast<Eigen::Index>(m) * N, N).cast<cdouble>();
    out[k] = std::move(acc);
  });
  return out;
}

QuasiperiodicityEstimate estimateQuasiperiodicity(const Eigen::VectorXd& u, const TruncationIndex& index, int N,
                                                  const Lattice& lattice, const BZQuadrature& grid) {
  require(grid.kind == QuadratureKind::Uniform, ErrorKind::InvalidArgument,
          "quasi-periodicity estimates need a uniform zone grid");
  const auto hat = truncatedFloquetTransform(u, index, N, lattice, grid.nodes);
  std::vector<double> norms(hat.size());
  for (std::size_t k = 0; k < hat.size(); ++k) norms[k] = hat[k].norm();
  const std::size_t best = static_cast<std::size_t>(std::max_element(norms.begin(), norms.end()) - norms.begin());
  QuasiperiodicityEstimate est;
  est.peak = norms[best];
  std::vector<double> sorted = norms;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  est.median = sorted[sorted.size() / 2];
  est.flat = !(est.peak >= 2.0 * est.median);

  const int m = grid.points;
  const int d = grid.dimension;
  std::array<int, 3> k{0, 0, 0};
  std::size_t rest = best;
  for (int j = d - 1; j >= 0; --j) {
    k[static_cast<std::size_t>(j)] = static_cast<int>(rest % static_cast<std::size_t>(m));
    rest /= static_cast<std::size_t>(m);
  }
  const BrillouinZone bz = dualBasis(lattice);
  Vec3 alpha = grid.nodes[best];
  for (int j = 0; j < d; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    auto neighbour = [&](int step) {
      std::array<int, 3> kk = k;
      kk[uj] = ((k[uj] + step) % m + m) % m;
      return norms[flatIndex(kk, m, d)];
    };
    const double fm = neighbour(-1);
    const double f0 = norms[best];
    const double fp = neighbour(1);
    const double denom = fm - 2.0 * f0 + fp;
    if (denom < 0.0) {
      const double shift = std::clamp(0.5 * (fm - fp) / denom, -0.45, 0.45);
      alpha += shift / m * bz.duals[uj];
    }
  }
  est.alpha = alpha;
  est.mirror = -alpha;
  return est;
}

}  // namespace capmat
