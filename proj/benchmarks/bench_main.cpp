#include <random>

#include <benchmark/benchmark.h>

#include "sfg/classical.hpp"
#include "sfg/fnin.hpp"
#include "sfg/refine.hpp"
#include "sfg/spectral.hpp"
#include "sfg/synth.hpp"

namespace {

using namespace sfg;

void BM_SpectralConv(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    nn::SpectralWeights R(16, 16, 32, 32);
    for (auto& z : R.data) z = nn::Complex(d(rng), d(rng));
    nn::Tensor x(32, n, n);
    for (auto& v : x.data) v = d(rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::spectral_conv(x, R));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_SpectralConv)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_IntegrateDct(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SyntheticSample s = synth_dataset(parse_synth_spec("sinusoid size=" + std::to_string(n)), 0).front();
    const GradientField g = gradients_from_normals(s.normals, s.cam);
    for (auto _ : state) benchmark::DoNotOptimize(integrate_dct(g));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_IntegrateDct)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RefineSigmoid(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SyntheticSample s = synth_dataset(parse_synth_spec("ramp size=" + std::to_string(n)), 0).front();
    const DepthMap z0 = integrate_dct(gradients_from_normals(s.normals, s.cam));
    RefineOptions opts;
    opts.mode = WeightMode::sigmoid;
    for (auto _ : state) benchmark::DoNotOptimize(refine(s.normals, s.cam, z0, nullptr, opts));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_RefineSigmoid)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FninForward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SyntheticSample s = synth_dataset(parse_synth_spec("bump size=" + std::to_string(n)), 0).front();
    const FninParams p = FninParams::random(FninHyper{}, 0);
    for (auto _ : state) benchmark::DoNotOptimize(fnin_forward(s.normals, s.cam, p));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_FninForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
