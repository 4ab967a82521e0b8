// Serial reference vs OpenMP kernels on cell-sized float tensors.
#include <benchmark/benchmark.h>

#include <random>

#include "usaa/kernels.hpp"

namespace {

using usaa::nn::ConvGeometry;
using usaa::nn::Tensor;

Tensor<float> filled(int n, int c, int h, int w, unsigned seed) {
  Tensor<float> t(n, c, h, w);
  std::mt19937 engine(seed);
  std::uniform_real_distribution<float> draw(-1.0f, 1.0f);
  for (auto& v : t.data) v = draw(engine);
  return t;
}

// args: batch, channels, spatial, kernel, dilation, depthwise
ConvGeometry geometry(const benchmark::State& state) {
  ConvGeometry g;
  g.kernel = static_cast<int>(state.range(3));
  g.dilation = static_cast<int>(state.range(4));
  g.padding = g.dilation * (g.kernel - 1) / 2;
  g.groups = state.range(5) != 0 ? static_cast<int>(state.range(1)) : 1;
  return g;
}

struct ConvCase {
  Tensor<float> x, w, grad;
  ConvGeometry g;
};

ConvCase make_case(const benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2));
  ConvCase out;
  out.g = geometry(state);
  out.x = filled(n, c, s, s, 1);
  out.w = filled(c, c / out.g.groups, out.g.kernel, out.g.kernel, 2);
  out.grad = filled(n, c, out.g.out_size(s), out.g.out_size(s), 3);
  return out;
}

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  const auto k = make_case(state);
  for (auto _ : state) {
    auto y = Parallel ? usaa::nn::omp::conv2d_forward(k.x, k.w, k.g)
                      : usaa::nn::serial::conv2d_forward(k.x, k.w, k.g);
    benchmark::DoNotOptimize(y.data.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  const auto k = make_case(state);
  for (auto _ : state) {
    auto gi = Parallel ? usaa::nn::omp::conv2d_backward_input(k.grad, k.w, k.g, k.x.shape)
                       : usaa::nn::serial::conv2d_backward_input(k.grad, k.w, k.g, k.x.shape);
    auto gw = Parallel ? usaa::nn::omp::conv2d_backward_weight(k.grad, k.x, k.g, k.w.shape)
                       : usaa::nn::serial::conv2d_backward_weight(k.grad, k.x, k.g, k.w.shape);
    benchmark::DoNotOptimize(gi.data.data());
    benchmark::DoNotOptimize(gw.data.data());
  }
}

template <bool Parallel>
void max_pool(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const int s = static_cast<int>(state.range(2));
  const auto x = filled(n, c, s, s, 4);
  std::vector<int> argmax;
  for (auto _ : state) {
    auto y = Parallel ? usaa::nn::omp::max_pool3_forward(x, 1, argmax)
                      : usaa::nn::serial::max_pool3_forward(x, 1, argmax);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"n", "c", "s", "k", "d", "dw"});
  b->Args({32, 16, 28, 1, 1, 0});
  b->Args({32, 16, 28, 3, 1, 1});
  b->Args({32, 16, 28, 5, 1, 1});
  b->Args({32, 16, 28, 3, 2, 1});
  b->Args({32, 32, 14, 3, 1, 0});
  b->Unit(benchmark::kMicrosecond);
}

void pool_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"n", "c", "s"});
  b->Args({32, 16, 28});
  b->Args({32, 64, 7});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(conv_forward<true>)->Name("conv_forward/omp")->Apply(conv_args);
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(conv_backward<true>)->Name("conv_backward/omp")->Apply(conv_args);
BENCHMARK(max_pool<false>)->Name("max_pool/serial")->Apply(pool_args);
BENCHMARK(max_pool<true>)->Name("max_pool/omp")->Apply(pool_args);

BENCHMARK_MAIN();
