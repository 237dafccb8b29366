#include <benchmark/benchmark.h>

#include "qdiag/network.hpp"
#include "qdiag/qttention.hpp"

using namespace qdiag;

static void LayerZeroQttention(benchmark::State& state) {
    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 10));
    relinear_init(model, 3);
    Rng rng(5);
    QuadraticParams& p = model.conv(0).params();
    for (std::size_t i = 0; i < p.w_g->value.numel(); ++i) {
        p.w_g->value[i] = 0.1 * rng.normal();
        p.w_b->value[i] = 0.1 * rng.normal();
    }
    Tensor signal({1, 2048});
    for (std::size_t i = 0; i < signal.numel(); ++i) signal[i] = rng.normal();
    for (auto _ : state) {
        QttentionMap map = layer_qttention(model, signal, 0);
        benchmark::DoNotOptimize(map.values.data());
    }
}
BENCHMARK(LayerZeroQttention);

static void AssembleDeepLayerMap(benchmark::State& state) {
    QuadraticParams p("p", NeuronVariant::kQuadratic, 64, 32, 3);
    Rng rng(7);
    for (Parameter* q : p.parameters()) {
        for (std::size_t i = 0; i < q->value.numel(); ++i) q->value[i] = rng.normal();
    }
    Tensor input({32, 64});
    for (std::size_t i = 0; i < input.numel(); ++i) input[i] = rng.normal();
    for (auto _ : state) {
        QttentionMap map = assemble_map(input, p, 1, 1);
        benchmark::DoNotOptimize(map.values.data());
    }
}
BENCHMARK(AssembleDeepLayerMap);
