#include <benchmark/benchmark.h>

#include "bnlab/kernels.hpp"
#include "bnlab/rng.hpp"

namespace {

using namespace bnlab;

Tensor random_tensor(Shape shape, std::uint64_t stream) {
    SeededRng rng(7, stream);
    Tensor t(std::move(shape));
    for (auto& v : t.storage()) v = rng.normal();
    return t;
}

template <Tensor (*F)(const Tensor&, const Tensor&)>
void matmul_bench(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 0), b = random_tensor({n, n}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(F(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Tensor (*F)(const Tensor&, const Tensor&)>
void conv_forward_bench(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const Tensor x = random_tensor({32, c, 16, 16}, 0), k = random_tensor({c, c, 3, 3}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(F(x, k));
}

template <ConvGrads (*F)(const Tensor&, const Tensor&, const Tensor&)>
void conv_backward_bench(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const Tensor x = random_tensor({32, c, 16, 16}, 0), k = random_tensor({c, c, 3, 3}, 1);
    const Tensor up = random_tensor({32, c, 16, 16}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(F(up, x, k));
}

template <Tensor (*F)(const Tensor&)>
void gram_bench(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor x = random_tensor({n, n}, 0);
    for (auto _ : state) benchmark::DoNotOptimize(F(x));
}

}  // namespace

BENCHMARK(matmul_bench<kernels::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(matmul_bench<reference::matmul>)->Name("matmul/reference")->Arg(64)->Arg(256);
BENCHMARK(conv_forward_bench<kernels::conv2d_forward>)->Name("conv_forward/parallel")->Arg(8)->Arg(16);
BENCHMARK(conv_forward_bench<reference::conv2d_forward>)->Name("conv_forward/reference")->Arg(8)->Arg(16);
BENCHMARK(conv_backward_bench<kernels::conv2d_backward>)->Name("conv_backward/parallel")->Arg(8)->Arg(16);
BENCHMARK(conv_backward_bench<reference::conv2d_backward>)->Name("conv_backward/reference")->Arg(8)->Arg(16);
BENCHMARK(gram_bench<kernels::gram>)->Name("gram/parallel")->Arg(128)->Arg(256);
BENCHMARK(gram_bench<reference::gram>)->Name("gram/reference")->Arg(128)->Arg(256);

BENCHMARK_MAIN();
