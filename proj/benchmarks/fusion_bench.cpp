#include <benchmark/benchmark.h>

#include "kpff/fusion.hpp"
#include "kpff/rng.hpp"

namespace {

using namespace kpff;

FusionInputs make_inputs(std::size_t n, std::size_t r) {
  Rng rng(42);
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({r});
    for (auto& v : x.values()) v = rng.uniform(-1.0, 1.0);
    xs.push_back(std::move(x));
  }
  return FusionInputs(std::move(xs));
}

void grid(benchmark::internal::Benchmark* b) {
  for (long n : {2, 4, 8, 16})
    for (long r : {64, 256, 1024, 4096}) b->Args({n, r});
}

void BM_FuseAdd(benchmark::State& state) {
  const auto inputs = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fuse_add(inputs));
}
BENCHMARK(BM_FuseAdd)->Apply(grid);

void BM_FuseConcat(benchmark::State& state) {
  const auto inputs = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fuse_concat(inputs));
}
BENCHMARK(BM_FuseConcat)->Apply(grid);

void BM_KpffForward(benchmark::State& state) {
  const std::size_t n = state.range(0), r = state.range(1);
  const auto inputs = make_inputs(n, r);
  KpffLayer layer(n);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(inputs));
  state.counters["mul_adds"] = static_cast<double>(n * n * r);
}
BENCHMARK(BM_KpffForward)->Apply(grid);

void BM_KpffBackward(benchmark::State& state) {
  const std::size_t n = state.range(0), r = state.range(1);
  const auto inputs = make_inputs(n, r);
  KpffLayer layer(n);
  layer.forward(inputs);
  Tensor upstream({n * r});
  upstream.fill(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.backward(upstream));
    layer.zero_grads();
  }
}
BENCHMARK(BM_KpffBackward)->Apply(grid);

void BM_Kron(benchmark::State& state) {
  const std::size_t m = state.range(0);
  Tensor a({m, m}), b({m, m});
  a.fill(0.5);
  b.fill(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(kron(a, b));
}
BENCHMARK(BM_Kron)->Arg(4)->Arg(16)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
