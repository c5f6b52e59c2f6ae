#include <benchmark/benchmark.h>

#include <vector>

#include "driftbayes/kernels.hpp"
#include "driftbayes/simulate.hpp"

using namespace driftbayes;

// Serial reference against the OpenMP kernels. The second range argument is
// the thread count handed to the parallel variant (0 means serial).

namespace {

const DriftSpec& ou_drift() {
  static const DriftSpec d = DriftSpec::ou(1.0, 2.0, {1.0, 1.0, 1.0});
  return d;
}

void set_mode(benchmark::State& state) {
  if (state.range(1) > 0) kernels::set_threads(static_cast<int>(state.range(1)));
}

void BM_EulerEndpoints(benchmark::State& state) {
  set_mode(state);
  const std::vector<double> x{0.3};
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if (state.range(1) == 0)
      kernels::serial::euler_endpoints(ou_drift(), x, 0.5, 64, 1, out);
    else
      kernels::parallel::euler_endpoints(ou_drift(), x, 0.5, 64, 1, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GirsanovPaths(benchmark::State& state) {
  set_mode(state);
  const std::vector<double> x{0.3};
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> lw(n), end(n);
  for (auto _ : state) {
    if (state.range(1) == 0)
      kernels::serial::girsanov_paths(ou_drift(), x, 0.5, 32, 2, lw, end);
    else
      kernels::parallel::girsanov_paths(ou_drift(), x, 0.5, 32, 2, lw, end);
    benchmark::DoNotOptimize(lw.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AtomLogLikelihoods(benchmark::State& state) {
  set_mode(state);
  std::vector<DriftSpec> atoms;
  for (int j = 0; j < state.range(0); ++j) {
    const double beta = 0.2 + 1.8 * j / static_cast<double>(state.range(0));
    atoms.push_back(DriftSpec::ou(beta, 2.0, {beta, 1.0, 1.0}));
  }
  std::vector<StationaryLaw> laws;
  for (const auto& a : atoms) laws.push_back(stationary_law(a));
  std::vector<const StationaryLaw*> ptrs;
  for (const auto& l : laws) ptrs.push_back(&l);
  const auto series =
      simulate_series(ou_drift(), stationary_law(ou_drift()), 0.5, 2000, {SchemeKind::exact_ou, 1}, 3);
  std::vector<double> out(atoms.size());
  for (auto _ : state) {
    if (state.range(1) == 0)
      kernels::serial::atom_log_likelihoods(atoms, ptrs, series, TransitionModel{}, true, out);
    else
      kernels::parallel::atom_log_likelihoods(atoms, ptrs, series, TransitionModel{}, true, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(series.size()));
}

void modes(benchmark::internal::Benchmark* b, long size) {
  const int hw = kernels::max_threads();
  b->Args({size, 0})->Args({size, 1});
  if (hw > 1) b->Args({size, hw});
}

}  // namespace

BENCHMARK(BM_EulerEndpoints)->Apply([](auto* b) { modes(b, 100000); })->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GirsanovPaths)->Apply([](auto* b) { modes(b, 100000); })->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AtomLogLikelihoods)->Apply([](auto* b) { modes(b, 256); })->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
