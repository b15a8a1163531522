// Serial reference kernels against their OpenMP counterparts, plus KID.
// Shapes follow the toy UNet (8x8 latents, 32-64 channels).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "garmentgen/evalkit.hpp"
#include "garmentgen/kernels.hpp"

namespace k = garmentgen::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

template <bool Parallel>
void BM_conv2d(benchmark::State& st) {
    const int c = static_cast<int>(st.range(0)), hw = static_cast<int>(st.range(1));
    const k::ConvGeom g{c, c, hw, hw, 3};
    const auto x = random_vec(static_cast<std::size_t>(c) * hw * hw, 1);
    const auto w = random_vec(static_cast<std::size_t>(c) * c * 9, 2);
    const auto b = random_vec(static_cast<std::size_t>(c), 3);
    std::vector<double> out(x.size());
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), out.data());
        else k::serial::conv2d_forward(g, x.data(), w.data(), b.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Parallel>
void BM_conv2d_backward(benchmark::State& st) {
    const int c = static_cast<int>(st.range(0)), hw = static_cast<int>(st.range(1));
    const k::ConvGeom g{c, c, hw, hw, 3};
    const auto x = random_vec(static_cast<std::size_t>(c) * hw * hw, 1);
    const auto w = random_vec(static_cast<std::size_t>(c) * c * 9, 2);
    const auto dout = random_vec(x.size(), 4);
    std::vector<double> dx(x.size()), dw(w.size()), db(static_cast<std::size_t>(c));
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::conv2d_backward(g, x.data(), w.data(), dout.data(), dx.data(), dw.data(), db.data());
        else k::serial::conv2d_backward(g, x.data(), w.data(), dout.data(), dx.data(), dw.data(), db.data());
        benchmark::DoNotOptimize(dx.data());
    }
}

template <bool Parallel>
void BM_attention(benchmark::State& st) {
    const int s = static_cast<int>(st.range(0)), d = static_cast<int>(st.range(1));
    const k::AttnGeom g{s, 2 * s, d, 1};
    const auto q = random_vec(static_cast<std::size_t>(s) * d, 1);
    const auto kk = random_vec(static_cast<std::size_t>(2 * s) * d, 2);
    const auto v = random_vec(kk.size(), 3);
    std::vector<double> out(q.size()), probs(static_cast<std::size_t>(s) * 2 * s);
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::attention_forward(g, q.data(), kk.data(), v.data(), out.data(), probs.data());
        else k::serial::attention_forward(g, q.data(), kk.data(), v.data(), out.data(), probs.data());
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Parallel>
void BM_linear(benchmark::State& st) {
    const int rows = static_cast<int>(st.range(0)), n = static_cast<int>(st.range(1));
    const auto x = random_vec(static_cast<std::size_t>(rows) * n, 1);
    const auto w = random_vec(static_cast<std::size_t>(n) * n, 2);
    const auto b = random_vec(static_cast<std::size_t>(n), 3);
    std::vector<double> y(x.size());
    for (auto _ : st) {
        if constexpr (Parallel) k::parallel::linear_forward(rows, n, n, x.data(), w.data(), b.data(), y.data());
        else k::serial::linear_forward(rows, n, n, x.data(), w.data(), b.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Parallel>
void BM_kid(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(n, 16), b(n, 16);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 16; ++j) {
            a(i, j) = nd(rng);
            b(i, j) = nd(rng);
        }
    for (auto _ : st) benchmark::DoNotOptimize(Parallel ? garmentgen::kid(a, b) : garmentgen::kid_serial(a, b));
}

}  // namespace

BENCHMARK(BM_conv2d<false>)->Name("conv2d/serial")->Args({32, 8})->Args({64, 8})->Args({32, 16});
BENCHMARK(BM_conv2d<true>)->Name("conv2d/parallel")->Args({32, 8})->Args({64, 8})->Args({32, 16});
BENCHMARK(BM_conv2d_backward<false>)->Name("conv2d_backward/serial")->Args({32, 8})->Args({64, 8});
BENCHMARK(BM_conv2d_backward<true>)->Name("conv2d_backward/parallel")->Args({32, 8})->Args({64, 8});
BENCHMARK(BM_attention<false>)->Name("attention/serial")->Args({64, 32})->Args({64, 64});
BENCHMARK(BM_attention<true>)->Name("attention/parallel")->Args({64, 32})->Args({64, 64});
BENCHMARK(BM_linear<false>)->Name("linear/serial")->Args({64, 128});
BENCHMARK(BM_linear<true>)->Name("linear/parallel")->Args({64, 128});
BENCHMARK(BM_kid<false>)->Name("kid/serial")->Arg(1000);
BENCHMARK(BM_kid<true>)->Name("kid/parallel")->Arg(1000);

BENCHMARK_MAIN();
