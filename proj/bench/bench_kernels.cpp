// Serial reference vs OpenMP potential kernel over the quadrature nodes.

#include "equiorb/group_io.hpp"
#include "equiorb/kernels.hpp"
#include "equiorb/optimizer.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>

using namespace equiorb;

namespace {

FourierPath figure_eight_path(int s) {
  const auto g = load_group(std::filesystem::path(EQUIORB_GROUPS_DIR) / "figure_eight.json").group;
  return random_init(g, s, 7, 1.0, QuadratureParams{default_nu(s)});
}

template <kernels::PotentialSums (*Kernel)(const FourierPath&, const TrigTable&, bool)>
void bm_potential(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const int nu = static_cast<int>(state.range(1));
  const FourierPath path = figure_eight_path(s);
  const auto table = TrigTable::get(s, nu);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(path, *table, true));
  state.SetItemsProcessed(state.iterations() * (nu + 1));
}

void bm_serial(benchmark::State& st) { bm_potential<&kernels::potential_serial>(st); }
void bm_omp(benchmark::State& st) { bm_potential<&kernels::potential_omp>(st); }
}  // namespace

BENCHMARK(bm_serial)->Args({12, 256})->Args({24, 1024})->Args({48, 4096});
BENCHMARK(bm_omp)->Args({12, 256})->Args({24, 1024})->Args({48, 4096});

BENCHMARK_MAIN();
