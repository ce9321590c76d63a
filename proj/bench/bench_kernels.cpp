// Serial reference vs OpenMP kernels on encoder-sized problems.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ldg/kernels/kernels.hpp"

namespace k = ldg::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(g);
    return v;
}

// First residual block of the default image encoder: 1 -> 8 channels, 48 bands, 13x13 patches.
k::Conv3dGeometry geometry(std::size_t batch, std::size_t cin, std::size_t cout) {
    k::Conv3dGeometry g;
    g.batch = batch;
    g.in_channels = cin;
    g.out_channels = cout;
    g.in = {48, 13, 13};
    g.kernel = {3, 3, 3};
    g.padding = {1, 1, 1};
    return g;
}

template <auto Fn>
void conv_forward(benchmark::State& st) {
    const auto g = geometry(static_cast<std::size_t>(st.range(0)), 8, 8);
    const auto x = noise(g.batch * g.in_channels * g.in_volume(), 1);
    const auto w = noise(g.out_channels * g.in_channels * g.kernel_volume(), 2);
    const auto b = noise(g.out_channels, 3);
    std::vector<double> y(g.batch * g.out_channels * g.out_volume());
    for (auto _ : st) {
        Fn(g, x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(g.batch));
}

template <auto Fn>
void conv_backward_input(benchmark::State& st) {
    const auto g = geometry(static_cast<std::size_t>(st.range(0)), 8, 8);
    const auto dy = noise(g.batch * g.out_channels * g.out_volume(), 4);
    const auto w = noise(g.out_channels * g.in_channels * g.kernel_volume(), 5);
    std::vector<double> dx(g.batch * g.in_channels * g.in_volume());
    for (auto _ : st) {
        std::fill(dx.begin(), dx.end(), 0.0);
        Fn(g, dy, w, dx);
        benchmark::DoNotOptimize(dx.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(g.batch));
}

template <auto Fn>
void matmul(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto a = noise(n * n, 6), b = noise(n * n, 7);
    std::vector<double> c(n * n);
    for (auto _ : st) {
        Fn(n, n, n, a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n * n));
}

}  // namespace

BENCHMARK(conv_forward<k::serial::conv3d_forward>)->Name("conv3d_forward/serial")->Arg(8)->Arg(32);
BENCHMARK(conv_forward<k::parallel::conv3d_forward>)->Name("conv3d_forward/parallel")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(conv_backward_input<k::serial::conv3d_backward_input>)->Name("conv3d_backward_input/serial")->Arg(32);
BENCHMARK(conv_backward_input<k::parallel::conv3d_backward_input>)
    ->Name("conv3d_backward_input/parallel")
    ->Arg(32)
    ->UseRealTime();
BENCHMARK(matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(matmul<k::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK_MAIN();
