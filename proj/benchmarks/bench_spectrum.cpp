#include <benchmark/benchmark.h>

#include <cmath>

#include "qdiag/spectrum.hpp"
#include "qdiag/tensor.hpp"

using namespace qdiag;

static void FftPow2(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    for (auto _ : state) {
        auto spec = fft(x);
        benchmark::DoNotOptimize(spec.data());
    }
    state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(FftPow2)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oNLogN);

static void EnvelopeSpectrum2048(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> x(2048);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::sin(0.05 * i) + 0.2 * rng.normal();
    }
    for (auto _ : state) {
        Spectrum s = envelope_spectrum(x, 12000.0);
        benchmark::DoNotOptimize(s.magnitudes.data());
    }
}
BENCHMARK(EnvelopeSpectrum2048);
