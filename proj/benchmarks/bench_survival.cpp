#include "fedsurv/survival.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_KaplanMeier(benchmark::State& state) {
  auto data = bench::make_data(static_cast<int>(state.range(0)), 1, 42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsurv::kaplan_meier(data));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KaplanMeier)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_LogRank(benchmark::State& state) {
  std::vector<fedsurv::SurvivalDataset> groups;
  for (int g = 0; g < 4; ++g)
    groups.push_back(bench::make_data(static_cast<int>(state.range(0)), 1, 7 + g));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsurv::logrank_test(groups));
  }
}
BENCHMARK(BM_LogRank)->Arg(1000)->Arg(10000);

void BM_BreslowBaseline(benchmark::State& state) {
  auto data = bench::make_data(static_cast<int>(state.range(0)), 5, 15);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(5, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsurv::breslow_baseline_hazard(data, beta));
  }
}
BENCHMARK(BM_BreslowBaseline)->Arg(1000)->Arg(10000);

}  // namespace
