#include <benchmark/benchmark.h>

#include "capmat/floquet.hpp"
#include "capmat/lattice_sums.hpp"
#include "capmat/latticegreen.hpp"
#include "capmat/singlelayer.hpp"
#include "capmat/spectra.hpp"

using namespace capmat;

namespace {

UnitCell unitSphere() { return UnitCell{{Sphere{Vec3::Zero(), 1.0}}}; }

Lattice latticeOf(int d) {
  if (d == 1) return Lattice::chain(3.0);
  if (d == 2) return Lattice::square(3.0);
  return Lattice::cubic(3.0);
}

void BM_IsolatedSphere(benchmark::State& state) {
  const Backend backend = state.range(0) == 0 ? Backend::multipole(4) : Backend::panel(3);
  const std::vector<Sphere> spheres{Sphere{Vec3::Zero(), 1.0}};
  for (auto _ : state) benchmark::DoNotOptimize(capacitanceOf(spheres, backend));
}
BENCHMARK(BM_IsolatedSphere)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FiniteChain(benchmark::State& state) {
  const Lattice chain = latticeOf(1);
  const double r = static_cast<double>(state.range(0)) * 3.0;
  for (auto _ : state) benchmark::DoNotOptimize(finiteCapacitance(unitSphere(), chain, r, Backend::multipole(2)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FiniteChain)->RangeMultiplier(2)->Range(8, 128)->Complexity()->Unit(benchmark::kMillisecond);

void BM_LatticeSum(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Lattice lattice = latticeOf(d);
  const QuasiPeriodicGreens g(lattice, Vec3(0.4, d > 1 ? 0.3 : 0.0, d > 2 ? 0.2 : 0.0), LatticeSumScheme{});
  const Vec3 x(0.7, 0.4, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(g.regular(x));
}
BENCHMARK(BM_LatticeSum)->DenseRange(1, 3);

void BM_QuasiCapacitance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const QuasiCapacitanceEvaluator ev(unitSphere(), latticeOf(d), Backend::multipole(2), LatticeSumScheme{});
  const Vec3 alpha(0.4, d > 1 ? 0.3 : 0.0, d > 2 ? 0.2 : 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(ev.capacitance(alpha));
}
BENCHMARK(BM_QuasiCapacitance)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_InverseFloquet(benchmark::State& state) {
  const Lattice chain = latticeOf(1);
  const QuasiCapacitanceEvaluator ev(unitSphere(), chain, Backend::multipole(2), LatticeSumScheme{});
  const QuasiCapacitanceGrid grid = sampleGrid(ev, BZQuadrature::graded(chain, 64));
  const std::vector<LatticeIndex> points = differenceSet(latticePoints(chain, 32 * 3.0));
  for (auto _ : state) benchmark::DoNotOptimize(inverseFloquet(chain, grid, points));
}
BENCHMARK(BM_InverseFloquet)->Unit(benchmark::kMillisecond);

void BM_DefectEigensolve(benchmark::State& state) {
  const Lattice chain = latticeOf(1);
  const TruncationIndex idx = latticePoints(chain, static_cast<double>(state.range(0)) * 3.0);
  const CapacitanceBlocks c = finiteCapacitance(unitSphere(), chain, idx, Backend::multipole(2));
  const Eigen::VectorXd b = buildDefectMatrix(DefectSpec::singleSite(1.0), idx, 1);
  const MaterialParams materials = MaterialParams::uniform(unitSphere(), 1e-3, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(defectEigensolve(c, b, &materials, {true, true}));
}
BENCHMARK(BM_DefectEigensolve)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
