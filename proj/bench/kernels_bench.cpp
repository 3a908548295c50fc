#include <benchmark/benchmark.h>

#include <vector>

#include "nocguard/kernels.hpp"
#include "nocguard/rng.hpp"

// Serial reference against the OpenMP kernels at the shapes one 8x8 graph
// produces in the default architecture.
using namespace nocguard;
using namespace nocguard::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Layer 3 of the temporal stack: 64 nodes, 16 -> 32 channels, length 181, kernel 10.
const ConvShape kConv{64, 16, 32, 181, 10, 1};
const PoolShape kPool{64 * 16, 392, 5, 2};
const LinearShape kLinear{64, 576, 256};

template <bool Parallel>
void conv_forward(benchmark::State& st) {
  const auto x = random_vec(kConv.batch * kConv.in_ch * kConv.length, 1);
  const auto w = random_vec(kConv.out_ch * kConv.in_ch * kConv.kernel, 2);
  const auto b = random_vec(kConv.out_ch, 3);
  std::vector<float> y(kConv.batch * kConv.out_ch * kConv.out_length());
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    else
      serial::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& st) {
  const auto x = random_vec(kConv.batch * kConv.in_ch * kConv.length, 1);
  const auto w = random_vec(kConv.out_ch * kConv.in_ch * kConv.kernel, 2);
  const auto dy = random_vec(kConv.batch * kConv.out_ch * kConv.out_length(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(kConv.out_ch);
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      serial::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void pool_forward(benchmark::State& st) {
  const auto x = random_vec(kPool.rows * kPool.length, 1);
  std::vector<float> y(kPool.rows * kPool.out_length());
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::avg_pool_forward(kPool, x.data(), y.data());
    else
      serial::avg_pool_forward(kPool, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void linear_forward(benchmark::State& st) {
  const auto x = random_vec(kLinear.rows * kLinear.in, 1);
  const auto w = random_vec(kLinear.in * kLinear.out, 2);
  const auto b = random_vec(kLinear.out, 3);
  std::vector<float> y(kLinear.rows * kLinear.out);
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::linear_forward(kLinear, x.data(), w.data(), b.data(), y.data());
    else
      serial::linear_forward(kLinear, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void linear_backward(benchmark::State& st) {
  const auto x = random_vec(kLinear.rows * kLinear.in, 1);
  const auto w = random_vec(kLinear.in * kLinear.out, 2);
  const auto dy = random_vec(kLinear.rows * kLinear.out, 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(kLinear.out);
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::linear_backward(kLinear, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      serial::linear_backward(kLinear, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void neighbors(benchmark::State& st) {
  const auto nb = neighbors_from_adjacency(adjacency_matrix(build_mesh_2d(8)));
  const auto x = random_vec(64 * 576, 1);
  std::vector<float> y(x.size());
  for (auto _ : st) {
    if constexpr (Parallel)
      parallel::neighbor_sum(nb, 576, x.data(), y.data());
    else
      serial::neighbor_sum(nb, 576, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial");
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel");
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial");
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel");
BENCHMARK(pool_forward<false>)->Name("avg_pool_forward/serial");
BENCHMARK(pool_forward<true>)->Name("avg_pool_forward/parallel");
BENCHMARK(linear_forward<false>)->Name("linear_forward/serial");
BENCHMARK(linear_forward<true>)->Name("linear_forward/parallel");
BENCHMARK(linear_backward<false>)->Name("linear_backward/serial");
BENCHMARK(linear_backward<true>)->Name("linear_backward/parallel");
BENCHMARK(neighbors<false>)->Name("neighbor_sum/serial");
BENCHMARK(neighbors<true>)->Name("neighbor_sum/parallel");

BENCHMARK_MAIN();
