#include "fedsurv/cox.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_CoxDerivatives(benchmark::State& state) {
  auto data = bench::make_data(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 3);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(state.range(1), 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsurv::cox_derivatives(data, beta));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoxDerivatives)->Args({1000, 5})->Args({10000, 5})->Args({10000, 20});

void BM_CoxFit(benchmark::State& state) {
  auto data = bench::make_data(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsurv::fit_cox(data));
  }
}
BENCHMARK(BM_CoxFit)->Args({1000, 5})->Args({5000, 10});

}  // namespace
