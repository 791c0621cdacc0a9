// Reference vs OpenMP convolution kernels on MBConv-like shapes.
// Run with OMP_NUM_THREADS set to compare scaling.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dnas3d/kernels.hpp"

namespace k = dnas3d::kernels;

namespace {

struct Buffers {
  std::vector<double> in, weight, out;
};

k::ConvGeometry geometry(const benchmark::State& state, bool depthwise) {
  k::ConvGeometry g;
  g.batch = 4;
  g.in_channels = std::size_t(state.range(0));
  g.out_channels = depthwise ? g.in_channels : g.in_channels * 2;
  g.depth = g.height = g.width = std::size_t(state.range(1));
  g.kernel = std::size_t(state.range(2));
  g.padding = g.kernel / 2;
  return g;
}

Buffers buffers(const k::ConvGeometry& g, bool depthwise) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Buffers b;
  b.in.resize(g.batch * g.in_channels * g.in_volume());
  b.weight.resize(g.out_channels * (depthwise ? 1 : g.in_channels) * g.kernel_volume());
  b.out.resize(g.batch * g.out_channels * g.out_volume());
  for (auto& v : b.in) v = u(rng);
  for (auto& v : b.weight) v = u(rng);
  return b;
}

template <auto Kernel, bool Depthwise>
void forward(benchmark::State& state) {
  const auto g = geometry(state, Depthwise);
  auto b = buffers(g, Depthwise);
  for (auto _ : state) {
    Kernel(g, b.in, b.weight, b.out);
    benchmark::DoNotOptimize(b.out.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(b.out.size()));
}

template <auto Kernel, bool Depthwise>
void backward_input(benchmark::State& state) {
  const auto g = geometry(state, Depthwise);
  auto b = buffers(g, Depthwise);
  std::vector<double> grad_in(b.in.size());
  for (auto _ : state) {
    Kernel(g, b.out, b.weight, grad_in);
    benchmark::DoNotOptimize(grad_in.data());
  }
}

template <auto Kernel, bool Depthwise>
void backward_weight(benchmark::State& state) {
  const auto g = geometry(state, Depthwise);
  auto b = buffers(g, Depthwise);
  std::vector<double> grad_w(b.weight.size());
  for (auto _ : state) {
    Kernel(g, b.in, b.out, grad_w);
    benchmark::DoNotOptimize(grad_w.data());
  }
}

void shapes(benchmark::internal::Benchmark* b) {
  b->ArgNames({"C", "S", "K"});
  for (long c : {8, 16})
    for (long k : {3, 5}) b->Args({c, 16, k});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(forward<k::reference::conv3d_forward, false>)->Name("conv_fwd/reference")->Apply(shapes);
BENCHMARK(forward<k::conv3d_forward, false>)->Name("conv_fwd/parallel")->Apply(shapes);
BENCHMARK(backward_input<k::reference::conv3d_backward_input, false>)->Name("conv_bwd_in/reference")->Apply(shapes);
BENCHMARK(backward_input<k::conv3d_backward_input, false>)->Name("conv_bwd_in/parallel")->Apply(shapes);
BENCHMARK(backward_weight<k::reference::conv3d_backward_weight, false>)->Name("conv_bwd_w/reference")->Apply(shapes);
BENCHMARK(backward_weight<k::conv3d_backward_weight, false>)->Name("conv_bwd_w/parallel")->Apply(shapes);
BENCHMARK(forward<k::reference::depthwise3d_forward, true>)->Name("dw_fwd/reference")->Apply(shapes);
BENCHMARK(forward<k::depthwise3d_forward, true>)->Name("dw_fwd/parallel")->Apply(shapes);
BENCHMARK(backward_input<k::reference::depthwise3d_backward_input, true>)->Name("dw_bwd_in/reference")->Apply(shapes);
BENCHMARK(backward_input<k::depthwise3d_backward_input, true>)->Name("dw_bwd_in/parallel")->Apply(shapes);
BENCHMARK(backward_weight<k::reference::depthwise3d_backward_weight, true>)->Name("dw_bwd_w/reference")->Apply(shapes);
BENCHMARK(backward_weight<k::depthwise3d_backward_weight, true>)->Name("dw_bwd_w/parallel")->Apply(shapes);

BENCHMARK_MAIN();
