#include <benchmark/benchmark.h>

#include <vector>

#include "qtherm/canonical.hpp"
#include "qtherm/fokker_planck.hpp"
#include "qtherm/geometry.hpp"
#include "qtherm/moments.hpp"
#include "qtherm/random.hpp"
#include "qtherm/sde.hpp"

using namespace qtherm;

namespace {

std::vector<double> ladder(std::size_t n) {
  std::vector<double> e(n);
  for (std::size_t k = 0; k < n; ++k) e[k] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
  return e;
}

void BM_EulerStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto h = HermitianOperator::diagonal(ladder(n));
  EulerMaruyamaStepper stepper(h, 1.0, 0.5, 1e-3);
  RandomStream rng(1, 0);
  CVector psi = sample_uniform(n, rng).amplitudes();
  for (auto _ : state) {
    stepper.advance(psi, rng);
    benchmark::DoNotOptimize(psi.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EulerStep)->Arg(2)->Arg(4)->Arg(8);

void BM_FokkerPlanckStep(benchmark::State& state) {
  const auto cells = static_cast<std::size_t>(state.range(0));
  const FokkerPlanckCP1 fp(cells, 1.0, 2.0, 1.0);
  Density1D rho = Density1D::gaussian(cells, 0.5, 0.1);
  const double dt = fp.max_stable_dt();
  for (auto _ : state) {
    rho = fp.step(rho, dt);
    benchmark::DoNotOptimize(rho.values.data());
  }
}
BENCHMARK(BM_FokkerPlanckStep)->Arg(800)->Arg(4096);

void BM_PartitionFunction(benchmark::State& state) {
  const Spectrum s(ladder(static_cast<std::size_t>(state.range(0))));
  double beta = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(partition_function(s, beta));
    beta = beta < 5.0 ? beta + 0.01 : 0.3;
  }
}
BENCHMARK(BM_PartitionFunction)->Arg(2)->Arg(7)->Arg(16);

void BM_DividedDifference(benchmark::State& state) {
  std::vector<double> nodes = ladder(static_cast<std::size_t>(state.range(0)));
  nodes[1] = nodes[0] + 1e-7;  // near-degenerate pair
  for (auto _ : state) benchmark::DoNotOptimize(exp_divided_difference(nodes, 0.0));
}
BENCHMARK(BM_DividedDifference)->Arg(4)->Arg(16);

void BM_LiouvilleRhs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RandomStream rng(2, 0);
  const auto h = HermitianOperator::diagonal(ladder(n));
  std::vector<PureState> states;
  for (int k = 0; k < 64; ++k) states.push_back(sample_uniform(n, rng));
  const auto m = estimate_moments(states);
  for (auto _ : state) benchmark::DoNotOptimize(liouville_rhs(m.rho, m.r2, h, 1.0, 0.5).data());
}
BENCHMARK(BM_LiouvilleRhs)->Arg(2)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
