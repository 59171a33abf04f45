// Serial reference kernels against their OpenMP counterparts.
//
//   ./bench_kernels --benchmark_filter=conv
//   SEGSEMI_THREADS=4 ./bench_kernels

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "segsemi/kernels.hpp"

namespace k = segsemi::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::ConvGeometry geometry(const benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(1));
  return {static_cast<std::size_t>(state.range(0)), c, c, 3, 4};
}

template <bool Omp>
void conv_forward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_vec(g.frames * g.in_channels, 1);
  const auto w = random_vec(g.taps * g.in_channels * g.out_channels, 2);
  const auto b = random_vec(g.out_channels, 3);
  std::vector<float> out(g.frames * g.out_channels);
  for (auto _ : state) {
    if constexpr (Omp) {
      k::omp::conv1d_forward(g, x.data(), w.data(), b.data(), out.data());
    } else {
      k::serial::conv1d_forward(g, x.data(), w.data(), b.data(), out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.frames));
}

template <bool Omp>
void conv_backward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_vec(g.frames * g.in_channels, 1);
  const auto w = random_vec(g.taps * g.in_channels * g.out_channels, 2);
  const auto go = random_vec(g.frames * g.out_channels, 3);
  std::vector<float> gx(x.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Omp) {
      k::omp::conv1d_backward_input(g, go.data(), w.data(), gx.data());
      k::omp::conv1d_backward_weight(g, x.data(), go.data(), gw.data(), gb.data());
    } else {
      k::serial::conv1d_backward_input(g, go.data(), w.data(), gx.data());
      k::serial::conv1d_backward_weight(g, x.data(), go.data(), gw.data(), gb.data());
    }
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.frames));
}

template <bool Omp>
void gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Omp) {
      k::omp::gemm(a.data(), b.data(), c.data(), n, n, n, false);
    } else {
      k::serial::gemm(a.data(), b.data(), c.data(), n, n, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

void conv_args(benchmark::internal::Benchmark* b) {
  for (long t : {512L, 4096L}) {
    for (long c : {16L, 64L}) b->Args({t, c});
  }
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(conv_forward<true>)->Name("conv_forward/omp")->Apply(conv_args)->UseRealTime();
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(conv_backward<true>)->Name("conv_backward/omp")->Apply(conv_args)->UseRealTime();
BENCHMARK(gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(256)->UseRealTime();

int main(int argc, char** argv) {
  k::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
