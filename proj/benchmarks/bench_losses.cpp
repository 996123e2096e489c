#include <benchmark/benchmark.h>

#include "gca/losses.hpp"
#include "gca/uot.hpp"
#include "gca/verify.hpp"

namespace {

gca::BatchPair pair_for(const benchmark::State& state) {
  std::mt19937_64 rng(42);
  return gca::random_batch_pair(rng, static_cast<std::size_t>(state.range(0)), 32, 0.5);
}

void BM_Sinkhorn(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  const gca::GibbsKernel k = gca::gibbs_kernel(gca::cosine_cost(p.z1, p.z2), 0.5);
  const gca::Marginals m = gca::Marginals::uniform(p.z1.batch());
  for (auto _ : state) benchmark::DoNotOptimize(gca::sinkhorn(k, m));
}

void BM_UnbalancedSinkhorn(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  const gca::GibbsKernel k = gca::gibbs_kernel(gca::cosine_cost(p.z1, p.z2), 0.5);
  const gca::Marginals m = gca::Marginals::uniform(p.z1.batch());
  for (auto _ : state) benchmark::DoNotOptimize(gca::unbalanced_sinkhorn(k, m));
}

void BM_Ince(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(gca::ince_loss(p.z1, p.z2, 0.5));
}

void BM_GcaInce(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(gca::gca_ince_loss(p.z1, p.z2, 0.5));
}

void BM_GcaRince(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(gca::gca_rince_loss(p.z1, p.z2, 0.5));
}

void BM_GcaUot(benchmark::State& state) {
  const gca::BatchPair p = pair_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(gca::gca_uot_loss(p.z1, p.z2, 0.5));
}

}  // namespace

BENCHMARK(BM_Sinkhorn)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_UnbalancedSinkhorn)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Ince)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GcaInce)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GcaRince)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GcaUot)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
