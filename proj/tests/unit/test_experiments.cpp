#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "capmat/config.hpp"
#include "capmat/error.hpp"
#include "capmat/experiments.hpp"
#include "capmat/parallel.hpp"

using namespace capmat;

namespace {
ExperimentConfig chain(const std::string& extra = "") {
  return parseConfig(R"({"geometry": {"lattice": "chain", "spacing": 3, "radius": 1})" + extra + "}", "json");
}

std::string csvOf(const RunOutput& run) {
  std::string all;
  for (const auto& t : run.tables) all += t.name() + "\n" + t.csv();
  return all;
}
}  // namespace

TEST(Experiments, QuadratureDefaults) {
  const ExperimentConfig c = chain();
  const BZQuadrature q = configuredQuadrature(c, c.makeLattice());
  EXPECT_EQ(q.kind, QuadratureKind::Graded);
  EXPECT_EQ(q.points, 64);
  const ExperimentConfig s = parseConfig(R"({"geometry": {"lattice": "square"}})", "json");
  EXPECT_EQ(configuredQuadrature(s, s.makeLattice()).points, 32);
}

TEST(Experiments, SameCacheEntryForCapacitanceAndDefect) {
  clearCaches();
  const ExperimentConfig c = chain(R"(, "spectrum": {"eta": 1}, "truncation": {"ladder": [4, 8, 16, 32]})");
  const CapacitanceConvergence cap = runCapacitanceConvergence(c);
  const DefectConvergence def = runDefectConvergence(c);
  EXPECT_EQ(cap.reference, def.c0);
  for (std::size_t k = 1; k < cap.rows.size(); ++k) EXPECT_LT(cap.rows[k].error, cap.rows[k - 1].error);
}

TEST(Experiments, DefectTopEigenvalueConvergesToRoot) {
  const ExperimentConfig c = chain(R"(, "spectrum": {"eta": 1}, "truncation": {"ladder": [4, 8, 16, 32]})");
  const DefectConvergence d = runDefectConvergence(c);
  ASSERT_TRUE(d.lambda0.has_value());
  ASSERT_EQ(d.modes.size(), 1u);
  for (std::size_t k = 1; k < d.modes[0].rows.size(); ++k) {
    EXPECT_LT(d.modes[0].rows[k].error, d.modes[0].rows[k - 1].error);
    EXPECT_LT(d.truncated[k].error, d.truncated[k - 1].error);
  }
  EXPECT_GT(*d.lambda0, d.window.upper());
}

TEST(Experiments, DefectRootRefinement) {
  const DefectRootResult r = solveDefectRoot(chain(), 0.2);
  ASSERT_TRUE(r.lambda0.has_value());
  EXPECT_LE(r.refinementDelta, 1e-8);
  EXPECT_GT(*r.lambda0, r.bandMax);
  EXPECT_FALSE(solveDefectRoot(chain(), -0.1).lambda0.has_value());
}

TEST(Experiments, BandGridResolution) {
  // band extrema from 64 and 256 uniform samples agree
  const ExperimentConfig c = chain();
  const QuasiCapacitanceEvaluator ev(c.unitCell(), c.makeLattice(), c.backend, c.scheme);
  const BandWindow coarse = bandWindow(ev, c.materials(), BZQuadrature::uniform(ev.lattice(), 64));
  const BandWindow fine = bandWindow(ev, c.materials(), BZQuadrature::uniform(ev.lattice(), 256));
  EXPECT_NEAR(coarse.upper() / fine.upper(), 1.0, 1e-4);
}

TEST(Experiments, NoInGapEigenvalueReported) {
  const ExperimentConfig c = chain(R"(, "spectrum": {"eta": 1e-4}, "truncation": {"ladder": [2, 3, 4, 5]})");
  try {
    runDefectConvergence(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoInGapEigenvalue);
  }
}

TEST(Experiments, BandReconstructionOnFiftyCells) {
  const ExperimentConfig c = chain(R"(, "truncation": {"r": 25, "centre": [-0.5, 0, 0]})");
  const BandReconstruction b = runBandReconstruction(c);
  EXPECT_EQ(b.cells, 50u);
  EXPECT_GE(b.matchedFraction, 0.8);
  EXPECT_GE(b.unmatchedNearGamma, 1u);
}

TEST(Experiments, CommandsAreDeterministicAcrossThreadCounts) {
  const ExperimentConfig c = chain(R"(, "truncation": {"r": 6})");
  for (const std::string& cmd : {std::string("cap-finite"), std::string("spectrum"), std::string("cap-realspace")}) {
    clearCaches();
    setThreadCount(1);
    const std::string one = csvOf(runCommand(cmd, c));
    clearCaches();
    setThreadCount(3);
    const std::string three = csvOf(runCommand(cmd, c));
    setThreadCount(1);
    EXPECT_EQ(one, three) << cmd;
  }
  EXPECT_THROW(runCommand("nope", c), Error);
}

TEST(Experiments, RunDirectoryLayout) {
  const ExperimentConfig c = chain(R"(, "truncation": {"r": 3})");
  const RunOutput run = runCommand("cap-finite", c);
  const auto dir = std::filesystem::temp_directory_path() / "capmat_run_test";
  std::filesystem::remove_all(dir);
  writeRun(dir.string(), run, runManifest(run, c, 0.5, 2));
  EXPECT_TRUE(std::filesystem::exists(dir / "capacitance.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "structure.csv"));
  std::ifstream in(dir / "run.json");
  const nlohmann::json m = nlohmann::json::parse(in);
  EXPECT_EQ(m.at("command"), "cap-finite");
  EXPECT_EQ(m.at("geometryHash"), run.geometryHash);
  EXPECT_EQ(m.at("threads"), 2);
  EXPECT_TRUE(m.at("config").contains("geometry"));
  EXPECT_TRUE(m.at("versions").contains("eigen"));
  std::filesystem::remove_all(dir);
}

TEST(Experiments, DiskCacheReusesGrids) {
  const auto dir = std::filesystem::temp_directory_path() / "capmat_cache_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = chain();
  c.cacheDir = dir.string();
  clearCaches();
  const QuasiCapacitanceEvaluator ev(c.unitCell(), c.makeLattice(), c.backend, c.scheme);
  const BZQuadrature q = BZQuadrature::uniform(ev.lattice(), 16);
  const QuasiCapacitanceGrid a = cachedGrid(c, ev, q);
  clearCaches();
  const QuasiCapacitanceGrid b = cachedGrid(c, ev, q);
  ASSERT_EQ(a.matrices.size(), b.matrices.size());
  for (std::size_t k = 0; k < a.matrices.size(); ++k) EXPECT_EQ(a.matrices[k], b.matrices[k]);
  EXPECT_FALSE(std::filesystem::is_empty(dir));
  std::filesystem::remove_all(dir);
}
