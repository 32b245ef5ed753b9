#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "linprobit/baselines.hpp"
#include "linprobit/linear_probit.hpp"
#include "linprobit/random.hpp"
#include "linprobit/rasch.hpp"
#include "linprobit/specfun.hpp"

using namespace linprobit;

namespace {

Eigen::MatrixXi random_responses(int users, int items, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXi r(users, items);
  for (int u = 0; u < users; ++u)
    for (int i = 0; i < items; ++i) r(u, i) = rng.uniform() < 0.5 ? 1 : -1;
  return r;
}

void BM_BinormCdf(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> x(1024), y(1024), r(1024);
  for (int k = 0; k < 1024; ++k) {
    x[k] = 4.0 * rng.normal();
    y[k] = 4.0 * rng.normal();
    r[k] = 2.0 * rng.uniform() - 1.0;
  }
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(binorm_cdf(x[k], y[k], Correlation(r[k])));
    k = (k + 1) & 1023;
  }
}
BENCHMARK(BM_BinormCdf);

void BM_Linearize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RaschDesign design{n, n, 1.0, 1.0};
  const GeneralProbitModel model = rasch_design_matrix(design);
  for (auto _ : state) benchmark::DoNotOptimize(linearize(model).C_y.data());
  state.SetComplexityN(n * n);
}
BENCHMARK(BM_Linearize)->Arg(5)->Arg(10)->Arg(20)->Complexity();

void BM_RaschFastFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RaschDesign design{n, n, 1.0, 1.0};
  const Eigen::MatrixXi r = random_responses(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(rasch_fast_lmmse_fit(design, r).estimate.data());
}
BENCHMARK(BM_RaschFastFit)->Arg(10)->Arg(20)->Arg(100)->Arg(1000);

void BM_RaschDenseFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RaschDesign design{n, n, 1.0, 1.0};
  const GeneralProbitModel model = rasch_design_matrix(design);
  const Vector y = response_vector(random_responses(n, n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(lmmse_fit(model, y).estimate.data());
}
BENCHMARK(BM_RaschDenseFit)->Arg(10)->Arg(20);

void BM_Gibbs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RaschDesign design{n, n, 1.0, 1.0};
  const GeneralProbitModel model = rasch_design_matrix(design);
  const Vector y = response_vector(random_responses(n, n, 3));
  GibbsConfig cfg;
  cfg.burn_in = 100;
  cfg.samples = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(pm_gibbs(model, y, cfg).mean.data());
  state.SetItemsProcessed(state.iterations() * (cfg.burn_in + cfg.samples));
}
BENCHMARK(BM_Gibbs)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
