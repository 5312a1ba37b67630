#include <benchmark/benchmark.h>

#include "lcwr/estimation.hpp"
#include "lcwr/metrics.hpp"
#include "lcwr/synthetic.hpp"

namespace {

using namespace lcwr;

void BM_FitModel(benchmark::State& state) {
  const auto world = make_world(2, static_cast<int>(state.range(0)), 1);
  const auto records = gen_dataset(world, world.model_ids[1]);
  const FitConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(records, world.true_gamma, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitModel)->Arg(800)->Arg(8000);

void BM_FitModelCv(benchmark::State& state) {
  const auto world = make_world(2, 800, 2);
  const auto records = gen_dataset(world, world.model_ids[1]);
  FitConfig config;
  config.cross_validate = true;
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(records, world.true_gamma, config));
}
BENCHMARK(BM_FitModelCv);

void BM_FitGamma(benchmark::State& state) {
  const auto world = make_world(static_cast<int>(state.range(0)), 800, 3);
  const auto records = gen_all(world);
  const FitConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gamma(records, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}
BENCHMARK(BM_FitGamma)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Bootstrap(benchmark::State& state) {
  std::vector<double> arena, a, b;
  for (int i = 0; i < 30; ++i) {
    arena.push_back(i);
    a.push_back(i + (i % 3));
    b.push_back(i % 7);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(bootstrap_corr_pvalue(a, b, arena, static_cast<int>(state.range(0)), 4));
  }
}
BENCHMARK(BM_Bootstrap)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
