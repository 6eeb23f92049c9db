#include <benchmark/benchmark.h>

#include "derand/constructions.hpp"
#include "derand/numerics.hpp"
#include "derand/verifier.hpp"

namespace {

using derand::Rational;

void BM_KlDivergence(benchmark::State& state) {
  const derand::numerics::DivergenceParams params{Rational(7, 20), Rational(1, 2)};
  const auto bits = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(derand::numerics::kl_divergence(params, bits));
}
BENCHMARK(BM_KlDivergence)->Arg(128)->Arg(256)->Arg(1024);

void BM_RequiredSampleSize(benchmark::State& state) {
  std::vector<derand::numerics::DivergenceClass> classes = {
      {{Rational(7, 20), Rational(1, 2)}, static_cast<std::uint64_t>(state.range(0))},
      {{Rational(13, 20), Rational(1, 2)}, static_cast<std::uint64_t>(state.range(0))}};
  for (auto _ : state) benchmark::DoNotOptimize(derand::numerics::required_sample_size(classes));
}
BENCHMARK(BM_RequiredSampleSize)->Arg(1 << 10)->Arg(1 << 20);

void BM_BiasSet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(derand::build_bias_set(n, Rational(3, 10)));
}
BENCHMARK(BM_BiasSet)->DenseRange(6, 10, 2)->Unit(benchmark::kMillisecond);

void BM_BiasSetEnumerated(benchmark::State& state) {
  derand::BuildOptions options;
  options.enumerate = true;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(derand::build_bias_set(n, Rational(3, 10), options));
  }
}
BENCHMARK(BM_BiasSetEnumerated)->DenseRange(6, 10, 2)->Unit(benchmark::kMillisecond);

void BM_KwiseDirect(benchmark::State& state) {
  derand::KwiseParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  p.k = 3;
  p.epsilon = Rational(1, 10);
  for (auto _ : state) benchmark::DoNotOptimize(derand::build_kwise_direct(p));
}
BENCHMARK(BM_KwiseDirect)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_KwiseL1(benchmark::State& state) {
  derand::KwiseParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  p.k = 3;
  p.r = 1;
  p.norm = derand::Norm::L1;
  p.epsilon = Rational(2, 5);
  for (auto _ : state) benchmark::DoNotOptimize(derand::build_kwise_l1(p));
}
BENCHMARK(BM_KwiseL1)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Phf(benchmark::State& state) {
  const derand::PhfParams p{static_cast<std::size_t>(state.range(0)), 37, 2, Rational(1, 2)};
  for (auto _ : state) benchmark::DoNotOptimize(derand::build_phf(p));
}
BENCHMARK(BM_Phf)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_CheckBias(benchmark::State& state) {
  const auto set = derand::build_bias_set(static_cast<std::size_t>(state.range(0)),
                                          Rational(3, 10))
                       .sample;
  for (auto _ : state) benchmark::DoNotOptimize(derand::check_bias(set, Rational(3, 10)));
}
BENCHMARK(BM_CheckBias)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_CheckKwise(benchmark::State& state) {
  derand::KwiseParams p;
  p.n = 8;
  p.k = 3;
  p.epsilon = Rational(1, 10);
  const auto set = derand::build_kwise_direct(p).sample;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        derand::check_kwise(set, 3, derand::KwiseNorm::Linf, Rational(1, 10)));
  }
}
BENCHMARK(BM_CheckKwise)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
