#include <benchmark/benchmark.h>

#include "crtgee/datagen.hpp"
#include "crtgee/gee.hpp"
#include "crtgee/inference.hpp"
#include "crtgee/sandwich.hpp"

using namespace crtgee;

namespace {

Scenario bench_scenario(std::size_t n_clusters, std::size_t size) {
  Scenario s;
  s.id = 1;
  s.n_clusters = n_clusters;
  s.cluster_size = ClusterSizeSpec::fixed(size);
  s.pi0 = s.pi1 = 0.3;
  s.icc = 0.05;
  s.seed = 42;
  return s;
}

void BM_GenerateTrial(benchmark::State& state) {
  const auto s = bench_scenario(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::size_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_trial(s, rep++));
}
BENCHMARK(BM_GenerateTrial)->Args({10, 50})->Args({50, 100});

void BM_FitGee(benchmark::State& state) {
  const auto data = generate_trial(bench_scenario(static_cast<std::size_t>(state.range(0)), 50), 0);
  const ModelSpec spec(Family::Poisson, Link::Log);
  for (auto _ : state) benchmark::DoNotOptimize(fit_gee(data, spec));
}
BENCHMARK(BM_FitGee)->Arg(10)->Arg(50);

void BM_AllVariances(benchmark::State& state) {
  const auto data = generate_trial(bench_scenario(static_cast<std::size_t>(state.range(0)), 50), 0);
  const auto fit = fit_gee(data, ModelSpec(Family::Binomial, Link::Logit));
  for (auto _ : state) benchmark::DoNotOptimize(compute_variances(fit, kAllVarianceKinds));
}
BENCHMARK(BM_AllVariances)->Arg(10)->Arg(50);

void BM_StudentTSf(benchmark::State& state) {
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(student_t_sf(t, 18.0));
    t = t > 5.0 ? 0.1 : t + 0.01;
  }
}
BENCHMARK(BM_StudentTSf);

}  // namespace

BENCHMARK_MAIN();
