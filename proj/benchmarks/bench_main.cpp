#include <benchmark/benchmark.h>

#include <random>

#include "cvfusion/model.hpp"
#include "cvfusion/spectral.hpp"
#include "cvfusion/transport.hpp"

using namespace cvfusion;

namespace {

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    std::vector<double> x(n);
    for (auto& v : x) v = dist(gen);
    return x;
}

void BM_FftPow2(benchmark::State& state) {
    const auto x = random_series(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(fft(x));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FftPow2)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oNLogN);

void BM_FftBluestein(benchmark::State& state) {
    const auto x = random_series(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(fft(x));
}
BENCHMARK(BM_FftBluestein)->Arg(250)->Arg(1000)->Arg(5000);

void BM_Fft2Canonical(benchmark::State& state) {
    const auto px = random_series(256 * 256, 3);
    for (auto _ : state) benchmark::DoNotOptimize(fft2(256, 256, px));
}
BENCHMARK(BM_Fft2Canonical);

void BM_Emd1d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto a = random_series(n, 4);
    auto b = random_series(n, 5);
    std::vector<double> centers(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::abs(a[i]);
        b[i] = std::abs(b[i]);
        centers[i] = static_cast<double>(i);
    }
    const auto p = normalize(a, centers);
    const auto q = normalize(b, centers);
    for (auto _ : state) benchmark::DoNotOptimize(emd_1d(p, q));
}
BENCHMARK(BM_Emd1d)->Arg(64)->Arg(128)->Arg(1024);

void BM_TrainEpoch(benchmark::State& state) {
    const auto spec = default_spec();
    std::mt19937_64 gen(6);
    std::normal_distribution<double> dist;
    std::vector<Sample> data;
    for (int i = 0; i < 64; ++i) {
        Sample s;
        s.x.resize(static_cast<std::size_t>(spec.input_len));
        for (auto& v : s.x) v = dist(gen);
        s.label = i % kNumClasses;
        data.push_back(std::move(s));
    }
    TrainConfig cfg;
    cfg.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train(data, spec, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
