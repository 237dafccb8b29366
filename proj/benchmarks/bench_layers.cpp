#include <benchmark/benchmark.h>

#include "qdiag/layers.hpp"
#include "qdiag/network.hpp"
#include "qdiag/training.hpp"

using namespace qdiag;

namespace {

Tensor random_batch(std::size_t b, std::size_t c, std::size_t l, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({b, c, l});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

void randomize(QuadraticParams& p, Rng& rng) {
    for (Parameter* q : p.parameters()) {
        for (std::size_t i = 0; i < q->value.numel(); ++i) q->value[i] = 0.1 * rng.normal();
    }
}

}  // namespace

static void ConvForward(benchmark::State& state) {
    const bool quadratic = state.range(0) != 0;
    QuadraticConv1d conv("conv",
                         quadratic ? NeuronVariant::kQuadratic : NeuronVariant::kConventional,
                         16, 32, 3, 1, 1);
    Rng rng(1);
    randomize(conv.params(), rng);
    Tensor x = random_batch(64, 16, 64, 2);
    for (auto _ : state) {
        Tensor out = conv.forward(x, Mode::kTrain);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(ConvForward)->Arg(0)->Arg(1);

static void ConvForwardBackward(benchmark::State& state) {
    const bool quadratic = state.range(0) != 0;
    QuadraticConv1d conv("conv",
                         quadratic ? NeuronVariant::kQuadratic : NeuronVariant::kConventional,
                         16, 32, 3, 1, 1);
    Rng rng(1);
    randomize(conv.params(), rng);
    Tensor x = random_batch(64, 16, 64, 2);
    Tensor dout({64, 32, 64});
    for (std::size_t i = 0; i < dout.numel(); ++i) dout[i] = rng.normal();
    for (auto _ : state) {
        Tensor out = conv.forward(x, Mode::kTrain);
        Tensor dx = conv.backward(dout);
        benchmark::DoNotOptimize(dx.data());
    }
}
BENCHMARK(ConvForwardBackward)->Arg(0)->Arg(1);

static void WideFirstConvForwardBackward(benchmark::State& state) {
    QuadraticConv1d conv("conv", NeuronVariant::kQuadratic, 1, 16, 64, 16, 24);
    Rng rng(1);
    randomize(conv.params(), rng);
    Tensor x = random_batch(64, 1, 2048, 2);
    Tensor dout({64, 16, 128});
    for (std::size_t i = 0; i < dout.numel(); ++i) dout[i] = rng.normal();
    for (auto _ : state) {
        Tensor out = conv.forward(x, Mode::kTrain);
        Tensor dx = conv.backward(dout);
        benchmark::DoNotOptimize(dx.data());
    }
}
BENCHMARK(WideFirstConvForwardBackward);

static void FullModelTrainStep(benchmark::State& state) {
    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 10));
    relinear_init(model, 3);
    model.set_threads(static_cast<int>(state.range(0)));
    Rng rng(5);
    Tensor batch = random_batch(64, 1, 2048, 7);
    std::vector<int> labels(64);
    for (auto& l : labels) l = static_cast<int>(rng.index(10));
    auto params = model.parameters();
    for (auto _ : state) {
        Tensor logits = model.forward(batch, Mode::kTrain);
        CrossEntropyResult ce = cross_entropy(logits, labels);
        model.backward(ce.dlogits);
        sgd_step(params, 0.1, 1e-3);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(FullModelTrainStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void FullModelEval(benchmark::State& state) {
    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 10));
    relinear_init(model, 3);
    model.set_threads(static_cast<int>(state.range(0)));
    Tensor batch = random_batch(256, 1, 2048, 7);
    for (auto _ : state) {
        Tensor logits = model.forward(batch, Mode::kEval);
        benchmark::DoNotOptimize(logits.data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(FullModelEval)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
