#include "capmat/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include <boost/version.hpp>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "capmat/error.hpp"
#include "capmat/parallel.hpp"
#include "capmat/spectra.hpp"

#ifndef CAPMAT_VERSION
#define CAPMAT_VERSION "unknown"
#endif

namespace capmat {

using nlohmann::json;

namespace {

std::mutex& cacheMutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, std::shared_ptr<const QuasiCapacitanceGrid>>& gridCache() {
  static std::map<std::string, std::shared_ptr<const QuasiCapacitanceGrid>> c;
  return c;
}

std::string gridKey(const ExperimentConfig& config, const QuasiCapacitanceEvaluator& ev, const BZQuadrature& quad) {
  const LatticeSumScheme& s = ev.scheme();
  std::string key = geometryHash(ev.cell(), ev.lattice()) + "|" + ev.backend().name() + "|" + toString(s.method) +
                    "|" + formatNumber(s.tolerance) + "|" + formatNumber(s.splitting) + "|" +
                    formatNumber(s.spatialCutoff) + "|" + formatNumber(s.spectralCutoff) + "|" +
                    std::to_string(s.directCutoff) + "|" + toString(quad.kind) + "|" + std::to_string(quad.points);
  (void)config;
  return key;
}

std::shared_ptr<const QuasiCapacitanceGrid> loadGridFile(const std::string& path, const std::string& key,
                                                         const BZQuadrature& quad) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return nullptr;
  }
  if (!j.is_object() || j.value("key", std::string()) != key) return nullptr;
  const json& mats = j.at("matrices");
  if (!mats.is_array() || mats.size() != quad.size()) return nullptr;
  auto grid = std::make_shared<QuasiCapacitanceGrid>();
  grid->quadrature = quad;
  for (const auto& m : mats) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXcd mat(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        const json& e = m.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c));
        mat(r, c) = cdouble(e.at(0).get<double>(), e.at(1).get<double>());
      }
    grid->matrices.push_back(std::move(mat));
  }
  return grid;
}

void saveGridFile(const std::string& path, const std::string& key, const QuasiCapacitanceGrid& grid) {
  json mats = json::array();
  for (const auto& m : grid.matrices) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
      rows.push_back(row);
    }
    mats.push_back(rows);
  }
  writeFile(path, json{{"key", key}, {"matrices", mats}}.dump());
}

std::vector<double> defaultLadder(int dimension) {
  switch (dimension) {
    case 1: return {4, 8, 16, 32, 64};
    case 2: return {2, 3, 4, 6, 8, 12};
    default: return {0.5, 1.5, 2.5, 3.5, 4.5};
  }
}

QuasiCapacitanceEvaluator makeEvaluator(const ExperimentConfig& config) {
  return QuasiCapacitanceEvaluator(config.unitCell(), config.makeLattice(), config.backend, config.scheme);
}

BZQuadrature bandGrid(const ExperimentConfig& config, const Lattice& lattice) {
  if (lattice.dimension() == 1) return BZQuadrature::uniform(lattice, config.bandPoints);
  BZQuadrature q = configuredQuadrature(config, lattice);
  if (q.kind == QuadratureKind::Uniform) return q;
  return BZQuadrature::uniform(lattice, q.points);
}

/// Richardson extrapolation on a geometric ladder; the order comes from the last three rungs.
double richardsonLimit(const std::vector<double>& r, const std::vector<double>& v) {
  const std::size_t n = v.size();
  require(n >= 3, ErrorKind::InsufficientData, "extrapolation needs at least three rungs");
  const double ratio = r[n - 1] / r[n - 2];
  const double d1 = v[n - 2] - v[n - 3];
  const double d2 = v[n - 1] - v[n - 2];
  if (d2 == 0.0) return v[n - 1];
  double gain = std::abs(d1 / d2);  // ratio^p
  const double prevRatio = r[n - 2] / r[n - 3];
  if (std::abs(prevRatio - ratio) > 1e-9 * ratio || !(gain > 1.0) || !std::isfinite(gain)) return v[n - 1];
  return v[n - 1] + d2 / (gain - 1.0);
}

// a single cell carries no in-gap mode in d = 3, so the defect ladder starts one shell out
std::vector<double> defaultDefectLadder(int dimension) {
  if (dimension == 3) return {1.5, 2.5, 3.5, 4.5};
  return defaultLadder(dimension);
}

RateFitOptions fitOptions(const ExperimentConfig& config, double scale) {
  RateFitOptions o;
  o.noiseFloor = config.scheme.tolerance * std::abs(scale);
  return o;
}

json fitJson(const RateFit& f) { return json::parse(rateFitJson(f)); }

Table fitTable() {
  return Table("fit", {"series", "classification", "margin_met", "exponent", "algebraic_r2", "rate",
                       "exponential_r2", "points_used", "points_excluded"});
}

void addFitRow(Table& t, const std::string& series, const RateFit& f) {
  t.addRow({series, toString(f.classification), cell(f.marginMet), cell(f.exponent), cell(f.algebraicR2),
            cell(f.rate), cell(f.exponentialR2), cell(f.pointsUsed), cell(f.pointsExcluded)});
}

struct Dislocation {
  std::vector<Sphere> spheres;
  UnitCell cell;
  Lattice lattice;
};

Dislocation buildDislocation(const ExperimentConfig& config, int cellsPerSide) {
  const auto& d = config.dislocation;
  Dislocation out{{}, UnitCell{{Sphere{Vec3(d.offsets[0], 0, 0), config.radius},
                                Sphere{Vec3(d.offsets[1], 0, 0), config.radius}}},
                  Lattice::chain(d.cellLength)};
  for (int m = -cellsPerSide; m < cellsPerSide; ++m)
    for (double off : d.offsets) {
      const double x = m * d.cellLength + off;
      bool removed = false;
      for (double rm : d.removed) removed = removed || std::abs(x - rm) < 1e-9 * d.cellLength;
      if (!removed) out.spheres.push_back(Sphere{Vec3(x, 0, 0), config.radius});
    }
  std::sort(out.spheres.begin(), out.spheres.end(),
            [](const Sphere& a, const Sphere& b) { return a.center.x() < b.center.x(); });
  return out;
}

CapacitanceBlocks blocksFromSpheres(const std::vector<Sphere>& spheres, const Backend& backend) {
  CapacitanceBlocks c;
  c.N = 1;
  c.provenance = Provenance::Finite;
  for (std::size_t k = 0; k < spheres.size(); ++k) c.blockIndex.push_back({static_cast<int>(k), 0, 0});
  c.entries = capacitanceOf(spheres, backend);
  FiniteStructure s;
  for (std::size_t k = 0; k < spheres.size(); ++k) s.push_back(PlacedSphere{c.blockIndex[k], 0, spheres[k]});
  c.geometryHash = geometryHash(s);
  return c;
}

}  // namespace

BZQuadrature configuredQuadrature(const ExperimentConfig& config, const Lattice& lattice) {
  const int d = lattice.dimension();
  int m = config.quadraturePoints;
  if (m == 0) {
    if (d == 1) {
      const double need = std::max(16.0, 2.0 * config.truncatedMax);
      m = 16;
      while (m < need) m *= 2;
    } else {
      m = d == 2 ? 32 : 16;
    }
  }
  if (config.quadratureKind == "uniform") return BZQuadrature::uniform(lattice, m);
  if (config.quadratureKind == "graded") return BZQuadrature::graded(lattice, m);
  return BZQuadrature::standard(lattice, m);
}

QuasiCapacitanceGrid cachedGrid(const ExperimentConfig& config, const QuasiCapacitanceEvaluator& evaluator,
                                const BZQuadrature& quad) {
  const std::string key = gridKey(config, evaluator, quad);
  {
    std::lock_guard<std::mutex> lock(cacheMutex());
    const auto it = gridCache().find(key);
    if (it != gridCache().end()) return *it->second;
  }
  std::string path;
  std::shared_ptr<const QuasiCapacitanceGrid> grid;
  if (!config.cacheDir.empty()) {
    path = (std::filesystem::path(config.cacheDir) / ("grid-" + fnv1aHex(key) + ".json")).string();
    grid = loadGridFile(path, key, quad);
  }
  if (!grid) {
    auto fresh = std::make_shared<QuasiCapacitanceGrid>(sampleGrid(evaluator, quad));
    if (!path.empty()) saveGridFile(path, key, *fresh);
    grid = std::move(fresh);
  }
  std::lock_guard<std::mutex> lock(cacheMutex());
  gridCache().emplace(key, grid);
  return *grid;
}

RealSpaceCoefficients cachedCoefficients(const ExperimentConfig& config, const QuasiCapacitanceEvaluator& evaluator,
                                         const std::vector<LatticeIndex>& points) {
  const Lattice& lattice = evaluator.lattice();
  const BZQuadrature quad = configuredQuadrature(config, lattice);
  const QuasiCapacitanceGrid coarse = cachedGrid(config, evaluator, quad);
  if (!config.floquet.checkConvergence) return realSpaceFromGrids(lattice, coarse, nullptr, points, config.floquet);
  const QuasiCapacitanceGrid fine = cachedGrid(config, evaluator, quad.refined(lattice));
  return realSpaceFromGrids(lattice, coarse, &fine, points, config.floquet);
}

void clearCaches() {
  std::lock_guard<std::mutex> lock(cacheMutex());
  gridCache().clear();
}

CapacitanceConvergence runCapacitanceConvergence(const ExperimentConfig& config) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  const Lattice& lattice = ev.lattice();
  const UnitCell cell = config.unitCell();
  const RealSpaceCoefficients c0 = cachedCoefficients(config, ev, {{0, 0, 0}});
  CapacitanceConvergence out;
  out.reference = c0.at({0, 0, 0})(0, 0);
  out.quadratureDelta = c0.convergenceDelta;
  std::vector<double> rs, errs;
  for (double r : config.ladderOr(defaultLadder(lattice.dimension()))) {
    const TruncationIndex idx = config.truncation(lattice, r);
    const auto centre = idx.find({0, 0, 0});
    require(centre.has_value(), ErrorKind::ConfigInvalid, "the truncation ball must contain the cell at the origin");
    const CapacitanceBlocks cf = finiteCapacitance(cell, lattice, idx, config.backend);
    ConvergenceRow row;
    row.r = r;
    row.cells = idx.size();
    row.value = cf.block(*centre, *centre, 0, 0);
    row.reference = out.reference;
    row.error = std::abs(out.reference - row.value);
    out.rows.push_back(row);
    rs.push_back(r);
    errs.push_back(row.error);
  }
  out.fit = fitRate(rs, errs, fitOptions(config, out.reference));
  return out;
}

BandWindow bandWindow(const QuasiCapacitanceEvaluator& evaluator, const MaterialParams& materials,
                      const BZQuadrature& grid) {
  ExperimentConfig dummy;
  const QuasiCapacitanceGrid samples = cachedGrid(dummy, evaluator, grid);
  const auto n = static_cast<std::size_t>(evaluator.cell().size());
  const std::size_t count = grid.size();
  std::vector<Eigen::VectorXd> values(count);
  for (std::size_t k = 0; k < count; ++k) values[k] = generalizedBandValues(samples.matrices[k], materials);
  // uniform chain grids are periodic in node order, so extrema between nodes can be refined
  const bool periodic = grid.dimension == 1 && grid.kind == QuadratureKind::Uniform && count >= 3;
  auto refined = [&](std::size_t b, std::size_t k, double sign) {
    const auto row = static_cast<Eigen::Index>(b);
    const double f0 = sign * values[k](row);
    if (!periodic) return f0;
    const double fm = sign * values[(k + count - 1) % count](row);
    const double fp = sign * values[(k + 1) % count](row);
    const double curvature = fm - 2.0 * f0 + fp;
    if (!(curvature < 0.0)) return f0;
    const double x = std::clamp(0.5 * (fm - fp) / curvature, -0.5, 0.5);
    return f0 + 0.5 * (fp - fm) * x + 0.5 * curvature * x * x;
  };
  BandWindow w;
  w.bandMin.assign(n, 0.0);
  w.bandMax.assign(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 1; k < count; ++k) {
      const auto row = static_cast<Eigen::Index>(b);
      if (values[k](row) < values[lo](row)) lo = k;
      if (values[k](row) > values[hi](row)) hi = k;
    }
    w.bandMin[b] = -refined(b, lo, -1.0);
    w.bandMax[b] = refined(b, hi, 1.0);
  }
  return w;
}

DefectRootResult solveDefectRoot(const ExperimentConfig& config, double eta) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  require(ev.cell().size() == 1, ErrorKind::InvalidArgument, "the defect equation is solved for one resonator per cell");
  const Lattice& lattice = ev.lattice();
  const MaterialParams materials = config.materials();
  BZQuadrature quad = configuredQuadrature(config, lattice);
  DefectRootResult out;
  std::optional<double> previous;
  for (int level = 0; level <= 4; ++level) {
    const QuasiCapacitanceGrid grid = cachedGrid(config, ev, quad);
    std::vector<double> band(quad.size());
    for (std::size_t k = 0; k < quad.size(); ++k) band[k] = generalizedBandValues(grid.matrices[k], materials)(0);
    out.bandMax = *std::max_element(band.begin(), band.end());
    out.quadraturePoints = quad.points;
    out.lambda0 = defectRoot(band, quad.weights, eta);
    if (!out.lambda0) return out;
    if (previous) {
      out.refinementDelta = std::abs(*out.lambda0 - *previous) / *out.lambda0;
      if (out.refinementDelta <= 1e-8) return out;
    }
    previous = out.lambda0;
    quad = quad.refined(lattice);
  }
  require(out.refinementDelta <= 1e-6, ErrorKind::BandDataInsufficient,
          "defect root still changes by " + formatNumber(out.refinementDelta) + " after four grid doublings");
  return out;
}

namespace {

DefectConvergence dislocationConvergence(const ExperimentConfig& config) {
  const Dislocation probe = buildDislocation(config, 1);
  const QuasiCapacitanceEvaluator ev(probe.cell, probe.lattice, config.backend, config.scheme);
  const MaterialParams cellMaterials = MaterialParams::uniform(probe.cell, config.contrast, config.speed);
  DefectConvergence out;
  out.window = bandWindow(ev, cellMaterials, BZQuadrature::uniform(probe.lattice, config.bandPoints));
  const double gapLo = out.window.bandMax[0] * (1.0 + config.inGapMargin);
  const double gapHi = out.window.bandMin[1] * (1.0 - config.inGapMargin);
  require(gapHi > gapLo, ErrorKind::NoInGapEigenvalue, "the dimerized chain has no band gap");
  const MaterialParams sphereMaterials =
      MaterialParams::uniform(UnitCell{{Sphere{Vec3::Zero(), config.radius}}}, config.contrast, config.speed);

  ModeSeries even{"even", {}, {}, 0.0, "richardson", {}};
  ModeSeries odd{"odd", {}, {}, 0.0, "richardson", {}};
  std::vector<double> rs;
  for (double r : config.ladderOr({4, 8, 16, 32, 64})) {
    const int k = static_cast<int>(std::lround(r));
    require(k >= 1 && std::abs(r - k) < 1e-12, ErrorKind::ConfigInvalid,
            "dislocation ladders count whole cells per side");
    const Dislocation d = buildDislocation(config, k);
    const std::size_t n = d.spheres.size();
    for (std::size_t i = 0; i < n; ++i)
      require(std::abs(d.spheres[i].center.x() + d.spheres[n - 1 - i].center.x()) < 1e-9 * config.dislocation.cellLength,
              ErrorKind::ConfigInvalid, "the dislocated chain must be mirror symmetric about the origin");
    const CapacitanceBlocks c = blocksFromSpheres(d.spheres, config.backend);
    const SpectrumResult s =
        defectEigensolve(c, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), &sphereMaterials);
    std::optional<std::pair<double, double>> bestEven, bestOdd;  // (eigenvalue, parity)
    for (Eigen::Index j = 0; j < s.eigenvalues.size(); ++j) {
      const double l = s.eigenvalues(j);
      if (!(l > gapLo && l < gapHi)) continue;
      const Eigen::VectorXd u = s.eigenvectors.col(j);
      const double parity = u.dot(u.reverse()) / u.squaredNorm();
      if (parity > 0.9 && (!bestEven || parity > bestEven->second)) bestEven = {{l, parity}};
      if (parity < -0.9 && (!bestOdd || parity < bestOdd->second)) bestOdd = {{l, parity}};
    }
    if (!bestEven || !bestOdd)
      fail(ErrorKind::NoInGapEigenvalue, "missing " + std::string(!bestEven ? "even" : "odd") +
                                             " in-gap mode for " + std::to_string(k) + " cells per side");
    rs.push_back(r);
    even.rows.push_back({r, n, bestEven->first, 0.0, 0.0});
    even.parity.push_back(bestEven->second);
    odd.rows.push_back({r, n, bestOdd->first, 0.0, 0.0});
    odd.parity.push_back(bestOdd->second);
  }
  for (ModeSeries* m : {&even, &odd}) {
    std::vector<double> vals, errs;
    for (const auto& row : m->rows) vals.push_back(row.value);
    m->reference = richardsonLimit(rs, vals);
    for (auto& row : m->rows) {
      row.reference = m->reference;
      row.error = std::abs(m->reference - row.value);
      errs.push_back(row.error);
    }
    // the last rung is exactly on the extrapolation line, so it carries no independent error
    std::vector<double> fr(rs.begin(), rs.end() - 1), fe(errs.begin(), errs.end() - 1);
    m->fit = fitRate(fr, fe, fitOptions(config, m->reference));
    out.modes.push_back(*m);
  }
  return out;
}

}  // namespace

DefectConvergence runDefectConvergence(const ExperimentConfig& config) {
  if (config.dislocation.enabled) return dislocationConvergence(config);
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  const Lattice& lattice = ev.lattice();
  const UnitCell cell = config.unitCell();
  const int n = static_cast<int>(cell.size());
  const MaterialParams materials = config.materials();
  const DefectSpec spec = config.defectSpec();
  require(!spec.entries.empty(), ErrorKind::ConfigInvalid, "defect convergence needs spectrum.eta or spectrum.defects");

  DefectConvergence out;
  out.window = bandWindow(ev, materials, bandGrid(config, lattice));
  const double edge = out.window.upper() * (1.0 + config.inGapMargin);

  std::optional<double> eta;
  if (n == 1 && spec.entries.size() == 1 && spec.entries.begin()->first.first == LatticeIndex{0, 0, 0} &&
      spec.entries.begin()->first.second == 0)
    eta = spec.entries.begin()->second - 1.0;
  if (eta) {
    const DefectRootResult root = solveDefectRoot(config, *eta);
    require(root.lambda0.has_value(), ErrorKind::NoInGapEigenvalue,
            "the defect equation has no root for eta = " + formatNumber(*eta));
    out.lambda0 = root.lambda0;
  }

  ModeSeries top{"top", {}, {}, 0.0, eta ? "defect-equation" : "richardson", {}};
  std::vector<double> rs;
  for (double r : config.ladderOr(defaultDefectLadder(lattice.dimension()))) {
    const TruncationIndex idx = config.truncation(lattice, r);
    const CapacitanceBlocks cf = finiteCapacitance(cell, lattice, idx, config.backend);
    const Eigen::VectorXd b = buildDefectMatrix(spec, idx, n);
    const SpectrumResult s = defectEigensolve(cf, b, &materials, {false, false});
    const double l = s.eigenvalues(s.eigenvalues.size() - 1);
    if (!(l > edge))
      fail(ErrorKind::NoInGapEigenvalue, "no eigenvalue above the band at r = " + formatNumber(r));
    rs.push_back(r);
    top.rows.push_back({r, idx.size(), l, 0.0, 0.0});
  }
  std::vector<double> vals, errs;
  for (const auto& row : top.rows) vals.push_back(row.value);
  top.reference = out.lambda0 ? *out.lambda0 : richardsonLimit(rs, vals);
  for (auto& row : top.rows) {
    row.reference = top.reference;
    row.error = std::abs(top.reference - row.value);
    errs.push_back(row.error);
  }
  if (out.lambda0) {
    top.fit = fitRate(rs, errs, fitOptions(config, top.reference));
  } else {
    std::vector<double> fr(rs.begin(), rs.end() - 1), fe(errs.begin(), errs.end() - 1);
    top.fit = fitRate(fr, fe, fitOptions(config, top.reference));
  }
  out.modes.push_back(top);

  std::vector<double> truncatedRungs;
  for (double r : rs)
    if (r <= config.truncatedMax) truncatedRungs.push_back(r);
  if (out.lambda0 && !truncatedRungs.empty()) {
    const TruncationIndex widest = config.truncation(lattice, truncatedRungs.back());
    const RealSpaceCoefficients coeffs = cachedCoefficients(config, ev, differenceSet(widest));
    out.c0 = coeffs.at({0, 0, 0})(0, 0);
    for (double r : truncatedRungs) {
      const TruncationIndex idx = config.truncation(lattice, r);
      const CapacitanceBlocks ct = truncatedMatrix(coeffs, idx, geometryHash(cell, lattice));
      const SpectrumResult s = defectEigensolve(ct, buildDefectMatrix(spec, idx, n), &materials, {false, false});
      const double l = s.eigenvalues(s.eigenvalues.size() - 1);
      out.truncated.push_back({r, idx.size(), l, *out.lambda0, std::abs(*out.lambda0 - l)});
    }
  }
  return out;
}

BandReconstruction runBandReconstruction(const ExperimentConfig& config) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  const Lattice& lattice = ev.lattice();
  require(lattice.dimension() == 1, ErrorKind::ConfigInvalid, "band reconstruction is defined for chains");
  const UnitCell cell = config.unitCell();
  const int n = static_cast<int>(cell.size());
  const MaterialParams materials = config.materials();
  const TruncationIndex idx = config.truncation(lattice, config.r);
  const CapacitanceBlocks cf = finiteCapacitance(cell, lattice, idx, config.backend);
  const SpectrumResult s =
      defectEigensolve(cf, Eigen::VectorXd::Ones(cf.entries.rows()), &materials, {true, false});

  const BZQuadrature grid = BZQuadrature::uniform(lattice, config.bandPoints);
  const QuasiCapacitanceGrid samples = cachedGrid(config, ev, grid);

  BandReconstruction out;
  out.cells = idx.size();
  const auto count = static_cast<std::size_t>(s.eigenvalues.size());
  std::vector<QuasiperiodicityEstimate> est(count);
  parallelFor(count, [&](std::size_t k) {
    est[k] = estimateQuasiperiodicity(s.eigenvectors.col(static_cast<Eigen::Index>(k)), idx, n, lattice, grid);
  });
  std::vector<Vec3> alphas(count);
  for (std::size_t k = 0; k < count; ++k) alphas[k] = est[k].alpha;
  const std::vector<Eigen::MatrixXcd> atAlpha = ev.capacitances(alphas);
  std::size_t unflagged = 0, matched = 0;
  std::vector<double> freqs;
  for (std::size_t k = 0; k < count; ++k) {
    BandPoint p;
    p.index = k;
    p.eigenvalue = s.eigenvalues(static_cast<Eigen::Index>(k));
    p.frequency = std::sqrt(std::max(0.0, p.eigenvalue));
    p.alpha = est[k].alpha;
    p.flat = est[k].flat;
    const Eigen::VectorXd bands = generalizedBandValues(atAlpha[k], materials);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < bands.size(); ++b) {
      const double wb = std::sqrt(std::max(0.0, bands(b)));
      const double dist = std::abs(p.frequency - wb) / wb;
      if (dist < best) {
        best = dist;
        p.bandFrequency = wb;
      }
    }
    p.distance = best;
    p.matched = !p.flat && best <= config.matchTolerance;
    if (p.flat) ++out.flagged;
    else {
      ++unflagged;
      freqs.push_back(p.frequency);
    }
    if (p.matched) ++matched;
    out.points.push_back(p);
  }
  out.matchedFraction = unflagged ? static_cast<double>(matched) / static_cast<double>(unflagged) : 0.0;

  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& a : grid.nodes) nearest = std::min(nearest, a.norm());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd bands = generalizedBandValues(samples.matrices[k], materials);
    for (Eigen::Index b = 0; b < bands.size(); ++b) {
      BandCurvePoint c;
      c.alpha = grid.nodes[k];
      c.lambda = bands(b);
      c.frequency = std::sqrt(std::max(0.0, c.lambda));
      for (double f : freqs) c.matched = c.matched || std::abs(f - c.frequency) <= config.matchTolerance * c.frequency;
      if (!c.matched && b == 0 && grid.nodes[k].norm() <= nearest * (1.0 + 1e-12)) ++out.unmatchedNearGamma;
      out.curve.push_back(c);
    }
  }
  return out;
}

const std::vector<std::string>& commandNames() {
  static const std::vector<std::string> names{"cap-finite", "cap-quasi",       "cap-realspace", "spectrum",
                                              "converge-cap", "converge-defect", "band"};
  return names;
}

namespace {

RunOutput capFinite(const ExperimentConfig& config) {
  RunOutput out;
  Table structure("structure", {"index", "m0", "m1", "m2", "resonator", "x", "y", "z", "radius"});
  Table cap("capacitance", {"row", "col", "value"});
  CapacitanceBlocks c;
  if (config.dislocation.enabled) {
    const int k = static_cast<int>(std::lround(config.r));
    c = blocksFromSpheres(buildDislocation(config, k).spheres, config.backend);
    const Dislocation d = buildDislocation(config, k);
    for (std::size_t i = 0; i < d.spheres.size(); ++i) {
      const auto& s = d.spheres[i];
      structure.addRow({cell(i), cell(static_cast<int>(i)), "0", "0", "0", cell(s.center.x()), cell(s.center.y()),
                        cell(s.center.z()), cell(s.radius)});
    }
  } else {
    const Lattice lattice = config.makeLattice();
    const UnitCell uc = config.unitCell();
    const TruncationIndex idx = config.truncation(lattice, config.r);
    c = finiteCapacitance(uc, lattice, idx, config.backend);
    const FiniteStructure fs = buildFiniteStructure(uc, lattice, idx);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto& p = fs[i];
      structure.addRow({cell(i), cell(p.cell[0]), cell(p.cell[1]), cell(p.cell[2]), cell(p.resonator),
                        cell(p.sphere.center.x()), cell(p.sphere.center.y()), cell(p.sphere.center.z()),
                        cell(p.sphere.radius)});
    }
  }
  for (Eigen::Index i = 0; i < c.entries.rows(); ++i)
    for (Eigen::Index j = 0; j < c.entries.cols(); ++j)
      cap.addRow({cell(static_cast<long long>(i)), cell(static_cast<long long>(j)), cell(c.entries(i, j))});
  out.geometryHash = c.geometryHash;
  out.tables = {structure, cap};
  const Eigen::VectorXd diag = c.entries.diagonal();
  out.summaryJson = json{{"resonators", c.entries.rows()},
                         {"provenance", toString(c.provenance)},
                         {"diagonalMin", diag.minCoeff()},
                         {"diagonalMax", diag.maxCoeff()}}
                        .dump();
  return out;
}

RunOutput capQuasi(const ExperimentConfig& config) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  const MaterialParams materials = config.materials();
  std::vector<Vec3> alphas = config.alphas;
  std::vector<Eigen::MatrixXcd> mats;
  if (alphas.empty()) {
    const BZQuadrature grid = bandGrid(config, ev.lattice());
    alphas = grid.nodes;
    mats = cachedGrid(config, ev, grid).matrices;
  } else {
    mats = ev.capacitances(alphas);
  }
  Table q("quasi_capacitance", {"alpha_x", "alpha_y", "alpha_z", "i", "j", "real", "imag"});
  Table b("bands", {"alpha_x", "alpha_y", "alpha_z", "band", "lambda", "frequency"});
  double hermitian = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const auto& a = alphas[k];
    for (Eigen::Index i = 0; i < mats[k].rows(); ++i)
      for (Eigen::Index j = 0; j < mats[k].cols(); ++j)
        q.addRow({cell(a.x()), cell(a.y()), cell(a.z()), cell(static_cast<long long>(i)),
                  cell(static_cast<long long>(j)), cell(mats[k](i, j).real()), cell(mats[k](i, j).imag())});
    const Eigen::VectorXd v = generalizedBandValues(mats[k], materials);
    for (Eigen::Index i = 0; i < v.size(); ++i)
      b.addRow({cell(a.x()), cell(a.y()), cell(a.z()), cell(static_cast<long long>(i)), cell(v(i)),
                cell(std::sqrt(std::max(0.0, v(i))))});
    hermitian = std::max(hermitian, (mats[k] - mats[k].adjoint()).norm() / mats[k].norm());
  }
  RunOutput out;
  out.geometryHash = geometryHash(ev.cell(), ev.lattice());
  out.tables = {q, b};
  out.summaryJson = json{{"samples", alphas.size()},
                         {"backend", ev.backend().name()},
                         {"scheme", ev.scheme().name()},
                         {"maxHermitianDefect", hermitian}}
                        .dump();
  return out;
}

RunOutput capRealspace(const ExperimentConfig& config) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  std::vector<LatticeIndex> points = config.coefficients;
  if (points.empty()) points = differenceSet(config.truncation(ev.lattice(), config.r));
  const RealSpaceCoefficients c = cachedCoefficients(config, ev, points);
  Table t("realspace", {"m0", "m1", "m2", "i", "j", "value"});
  for (std::size_t p = 0; p < c.points.size(); ++p)
    for (Eigen::Index i = 0; i < c.matrices[p].rows(); ++i)
      for (Eigen::Index j = 0; j < c.matrices[p].cols(); ++j)
        t.addRow({cell(c.points[p][0]), cell(c.points[p][1]), cell(c.points[p][2]), cell(static_cast<long long>(i)),
                  cell(static_cast<long long>(j)), cell(c.matrices[p](i, j))});
  RunOutput out;
  out.geometryHash = geometryHash(ev.cell(), ev.lattice());
  out.tables = {t};
  json s = {{"coefficients", c.points.size()},
            {"quadrature", {{"kind", toString(c.quadratureKind)}, {"M", c.quadraturePoints}}},
            {"imaginaryResidue", c.imaginaryResidue},
            {"convergenceDelta", c.convergenceDelta},
            {"extrapolated", c.extrapolated}};
  s["decayEstimate"] = c.decay ? fitJson(*c.decay) : json(nullptr);
  out.summaryJson = s.dump();
  return out;
}

RunOutput spectrum(const ExperimentConfig& config) {
  const QuasiCapacitanceEvaluator ev = makeEvaluator(config);
  const Lattice& lattice = ev.lattice();
  const UnitCell cell0 = config.unitCell();
  const int n = static_cast<int>(cell0.size());
  const MaterialParams materials = config.materials();
  const TruncationIndex idx = config.truncation(lattice, config.r);
  CapacitanceBlocks c;
  if (config.source == "finite") {
    c = finiteCapacitance(cell0, lattice, idx, config.backend);
  } else {
    const RealSpaceCoefficients coeffs = cachedCoefficients(config, ev, differenceSet(idx));
    c = truncatedMatrix(coeffs, idx, geometryHash(cell0, lattice));
  }
  const Eigen::VectorXd b = buildDefectMatrix(config.defectSpec(), idx, n);
  const SpectrumResult s = defectEigensolve(c, b, &materials, {true, true});
  const BandWindow window = bandWindow(ev, materials, bandGrid(config, lattice));
  BZQuadrature grid = bandGrid(config, lattice);
  std::vector<QuasiperiodicityEstimate> est(static_cast<std::size_t>(s.eigenvalues.size()));
  parallelFor(est.size(), [&](std::size_t k) {
    est[k] = estimateQuasiperiodicity(s.eigenvectors.col(static_cast<Eigen::Index>(k)), idx, n, lattice, grid);
  });
  Table t("eigenvalues", {"index", "eigenvalue", "frequency", "participation_ratio", "decay_rate", "decay_r2",
                          "peak_m0", "peak_m1", "peak_m2", "alpha_x", "alpha_y", "alpha_z", "flat", "in_band"});
  std::size_t inGap = 0;
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    const double l = s.eigenvalues(k);
    const auto& m = s.metrics[static_cast<std::size_t>(k)];
    const auto& e = est[static_cast<std::size_t>(k)];
    bool inBand = false;
    for (std::size_t bnd = 0; bnd < window.bandMin.size(); ++bnd)
      inBand = inBand || (l >= window.bandMin[bnd] * (1.0 - config.inGapMargin) &&
                          l <= window.bandMax[bnd] * (1.0 + config.inGapMargin));
    if (!inBand) ++inGap;
    const LatticeIndex& peak = idx.points[m.peakCell];
    t.addRow({cell(static_cast<long long>(k)), cell(l), cell(std::sqrt(std::max(0.0, l))),
              cell(m.participationRatio), cell(m.decayRate), cell(m.decayR2), cell(peak[0]), cell(peak[1]),
              cell(peak[2]), cell(e.alpha.x()), cell(e.alpha.y()), cell(e.alpha.z()), cell(e.flat), cell(inBand)});
  }
  RunOutput out;
  out.geometryHash = c.geometryHash;
  out.tables = {t};
  out.summaryJson = json{{"eigenvalues", s.eigenvalues.size()},
                         {"source", toString(c.provenance)},
                         {"maxResidual", s.maxResidual},
                         {"bandWindow", {window.lower(), window.upper()}},
                         {"outsideBands", inGap}}
                        .dump();
  return out;
}

RunOutput convergeCap(const ExperimentConfig& config) {
  const CapacitanceConvergence r = runCapacitanceConvergence(config);
  Table t("convergence", {"r", "cells", "finite", "infinite", "error"});
  for (const auto& row : r.rows)
    t.addRow({cell(row.r), cell(row.cells), cell(row.value), cell(row.reference), cell(row.error)});
  Table f = fitTable();
  addFitRow(f, "capacitance", r.fit);
  RunOutput out;
  out.geometryHash = geometryHash(config.unitCell(), config.makeLattice());
  out.tables = {t, f};
  out.summaryJson = json{{"reference", r.reference}, {"quadratureDelta", r.quadratureDelta}, {"fit", fitJson(r.fit)}}.dump();
  return out;
}

RunOutput convergeDefect(const ExperimentConfig& config) {
  const DefectConvergence r = runDefectConvergence(config);
  Table t("defect_convergence", {"mode", "r", "cells", "eigenvalue", "reference", "error", "parity"});
  Table f = fitTable();
  json modes = json::array();
  for (const auto& m : r.modes) {
    for (std::size_t k = 0; k < m.rows.size(); ++k) {
      const auto& row = m.rows[k];
      t.addRow({m.mode, cell(row.r), cell(row.cells), cell(row.value), cell(row.reference), cell(row.error),
                m.parity.empty() ? std::string() : cell(m.parity[k])});
    }
    addFitRow(f, m.mode, m.fit);
    modes.push_back({{"mode", m.mode}, {"reference", m.reference}, {"referenceSource", m.referenceSource},
                     {"fit", fitJson(m.fit)}});
  }
  RunOutput out;
  if (config.dislocation.enabled) {
    const Dislocation d = buildDislocation(config, 1);
    out.geometryHash = geometryHash(d.cell, d.lattice);
  } else {
    out.geometryHash = geometryHash(config.unitCell(), config.makeLattice());
  }
  out.tables = {t, f};
  if (!r.truncated.empty()) {
    Table tt("truncated_convergence", {"r", "cells", "eigenvalue", "reference", "error"});
    for (const auto& row : r.truncated)
      tt.addRow({cell(row.r), cell(row.cells), cell(row.value), cell(row.reference), cell(row.error)});
    out.tables.push_back(tt);
  }
  json s = {{"modes", modes}, {"bandWindow", {r.window.lower(), r.window.upper()}}};
  if (r.lambda0) s["lambda0"] = *r.lambda0;
  if (!r.truncated.empty()) s["c0"] = r.c0;
  out.summaryJson = s.dump();
  return out;
}

RunOutput band(const ExperimentConfig& config) {
  const BandReconstruction r = runBandReconstruction(config);
  Table p("band_reconstruction", {"index", "eigenvalue", "frequency", "alpha_x", "alpha_y", "alpha_z",
                                  "band_frequency", "distance", "flat", "matched"});
  for (const auto& x : r.points)
    p.addRow({cell(x.index), cell(x.eigenvalue), cell(x.frequency), cell(x.alpha.x()), cell(x.alpha.y()),
              cell(x.alpha.z()), cell(x.bandFrequency), cell(x.distance), cell(x.flat), cell(x.matched)});
  Table c("band_curve", {"alpha_x", "alpha_y", "alpha_z", "lambda", "frequency", "matched"});
  for (const auto& x : r.curve)
    c.addRow({cell(x.alpha.x()), cell(x.alpha.y()), cell(x.alpha.z()), cell(x.lambda), cell(x.frequency),
              cell(x.matched)});
  RunOutput out;
  out.geometryHash = geometryHash(config.unitCell(), config.makeLattice());
  out.tables = {p, c};
  out.summaryJson = json{{"cells", r.cells},
                         {"eigenpairs", r.points.size()},
                         {"flagged", r.flagged},
                         {"matchedFraction", r.matchedFraction},
                         {"unmatchedNearGamma", r.unmatchedNearGamma}}
                        .dump();
  return out;
}

}  // namespace

RunOutput runCommand(const std::string& command, const ExperimentConfig& config) {
  RunOutput out;
  if (command == "cap-finite") out = capFinite(config);
  else if (command == "cap-quasi") out = capQuasi(config);
  else if (command == "cap-realspace") out = capRealspace(config);
  else if (command == "spectrum") out = spectrum(config);
  else if (command == "converge-cap") out = convergeCap(config);
  else if (command == "converge-defect") out = convergeDefect(config);
  else if (command == "band") out = band(config);
  else fail(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
  out.command = command;
  return out;
}

std::string runManifest(const RunOutput& run, const ExperimentConfig& config, double wallSeconds, int threads) {
  json tables = json::array();
  for (const auto& t : run.tables) tables.push_back({{"file", t.name() + ".csv"}, {"columns", t.columns()}, {"rows", t.rows().size()}});
  char eigen[32];
  std::snprintf(eigen, sizeof eigen, "%d.%d.%d", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  json m = {{"command", run.command},
            {"config", json::parse(configToJson(config))},
            {"geometryHash", run.geometryHash},
            {"versions", {{"capmat", CAPMAT_VERSION}, {"eigen", eigen}, {"boost", BOOST_LIB_VERSION}}},
            {"threads", threads},
            {"seed", config.seed},
            {"wallClockSeconds", wallSeconds},
            {"tables", tables},
            {"summary", json::parse(run.summaryJson)}};
  return m.dump(2) + "\n";
}

void writeRun(const std::string& directory, const RunOutput& run, const std::string& manifest) {
  const std::filesystem::path dir(directory);
  for (const auto& t : run.tables) writeFile((dir / (t.name() + ".csv")).string(), t.csv());
  writeFile((dir / "run.json").string(), manifest);
}

}  // namespace capmat
