#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qdiag/eval.hpp"
#include "support/oracles.hpp"

using namespace qdiag;

TEST_CASE("accuracy basics") {
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    CHECK(accuracy(labels, labels) == 1.0);
    std::vector<int> wrong(10, 9);
    CHECK(accuracy(wrong, labels) == 0.0);
    std::vector<int> preds = labels;
    preds[0] = 1;
    preds[3] = 2;
    preds[6] = 1;
    CHECK(accuracy(preds, labels) == doctest::Approx(0.7));
    CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("confusion matrix: identity, single-column, random tally oracle") {
    std::vector<int> labels{0, 1, 2, 1, 0};
    ConfusionMatrix diag = confusion(labels, labels, 3);
    CHECK(diag.trace() == 5);
    CHECK(diag.total() == 5);

    std::vector<int> all_zero(5, 0);
    ConfusionMatrix col = confusion(all_zero, labels, 3);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t p = 1; p < 3; ++p) CHECK(col.at(t, p) == 0);
    }
    CHECK(col.at(1, 0) == 2);

    Rng rng(3);
    std::vector<int> rp(200), rl(200);
    for (int i = 0; i < 200; ++i) {
        rp[i] = static_cast<int>(rng.index(4));
        rl[i] = static_cast<int>(rng.index(4));
    }
    ConfusionMatrix cm = confusion(rp, rl, 4);
    long naive[4][4] = {};
    for (int i = 0; i < 200; ++i) ++naive[rl[i]][rp[i]];
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t p = 0; p < 4; ++p) CHECK(cm.at(t, p) == naive[t][p]);
    }
    // accuracy == trace / N exactly
    CHECK(accuracy(rp, rl) == doctest::Approx(static_cast<double>(cm.trace()) / 200.0));

    // faults judged healthy: column 0 minus the healthy-healthy cell
    long expected = 0;
    for (int i = 0; i < 200; ++i) {
        if (rl[i] != 0 && rp[i] == 0) ++expected;
    }
    CHECK(cm.faults_judged_healthy(0) == expected);
}

TEST_CASE("count_params: hand-counted fixture and additivity") {
    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 10));
    ParamCount pc = count_params(model);

    // hand count: conv weights 3*(16*1*64 + 32*16*3 + 64*32*3 + 3*64*64*3)
    const std::size_t conv_w =
        3 * (16 * 1 * 64 + 32 * 16 * 3 + 64 * 32 * 3 + 3 * (64 * 64 * 3));
    CHECK(pc.conv_weights == conv_w);

    std::size_t from_layers = 0;
    for (const auto& [name, count] : pc.per_layer) from_layers += count;
    CHECK(from_layers == pc.total);

    // first layer: 3*1024 weights + 48 biases quadratic, 1024 + 16 conventional
    Model wdcnn(build_backbone(VariantProfile::kWdcnn, 2048, 10));
    CHECK(model.conv(0).params().weight_count() == 3072);
    CHECK(wdcnn.conv(0).params().weight_count() == 1024);
    ParamCount wc = count_params(wdcnn);
    CHECK(pc.conv_weights == 3 * wc.conv_weights);
}

TEST_CASE("attention parameter estimate formulas") {
    AttentionParamEstimate e = attention_param_estimate(16, 1, 64, 2.0);
    CHECK(e.channel_attention == doctest::Approx(16.0 * 64 + 524288.0));
    CHECK(e.qttention == doctest::Approx(3.0 * 16 * 64));

    AttentionParamEstimate degenerate = attention_param_estimate(1, 5, 7, 2.0);
    CHECK(degenerate.channel_attention == doctest::Approx(35.0 + 2.0 / 4.0));
    CHECK(degenerate.qttention == doctest::Approx(105.0));

    // every backbone layer: attention cost dominates qttention cost
    ArchitectureSpec spec = build_backbone(VariantProfile::kQcnnBase, 2048, 10);
    std::size_t c_in = 1;
    for (const auto& b : spec.blocks) {
        AttentionParamEstimate est =
            attention_param_estimate(b.out_channels, c_in, b.kernel, 2.0);
        CHECK(est.channel_attention > est.qttention);
        c_in = b.out_channels;
    }

    CHECK_THROWS_AS(attention_param_estimate(0, 1, 1, 2.0), std::invalid_argument);
}

TEST_CASE("flops estimate: hand count and quadratic ratio") {
    ArchitectureSpec one;
    one.input_len = 2048;
    one.num_classes = 2;
    one.blocks = {{16, 64, 16, 24, true, true, NeuronVariant::kConventional}};
    one.dense = {{2, NeuronVariant::kConventional}};
    // conv: L_out = (2048+48-64)/16+1 = 128 -> 128*16*1*64 MACs; dense: 64*16*... pool halves to 64, flatten 16*64=1024 -> 1024*2
    const std::size_t conv_macs = 128 * 16 * 1 * 64;
    const std::size_t dense_macs = 1024 * 2;
    CHECK(flops_estimate(one) == conv_macs + dense_macs);

    ArchitectureSpec quad = one;
    quad.blocks[0].variant = NeuronVariant::kQuadratic;
    CHECK(flops_estimate(quad) == 3 * conv_macs + 2 * 128 * 16 + dense_macs);
}

TEST_CASE("linear hinge classifier separates a toy problem") {
    Rng rng(5);
    const std::size_t n = 200, dim = 8;
    Tensor features({n, dim});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        labels[i] = cls;
        for (std::size_t d = 0; d < dim; ++d) {
            features.at(i, d) = rng.normal() + (cls == 0 ? -2.0 : 2.0) * (d < 3 ? 1.0 : 0.0);
        }
    }
    LinearClassifier clf = train_linear_classifier(features, labels, 2, 30, 0.01, 7);
    CHECK(clf.accuracy_on(features, labels) == 1.0);
}

TEST_CASE("conflicting duplicate features cap accuracy at one half") {
    Tensor features({100, 4});
    std::vector<int> labels(100);
    Rng rng(9);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t d = 0; d < 4; ++d) {
            const double v = rng.normal();
            features.at(i, d) = v;
            features.at(i + 50, d) = v;
        }
        labels[i] = 0;
        labels[i + 50] = 1;
    }
    LinearClassifier clf = train_linear_classifier(features, labels, 2, 20, 0.01, 3);
    CHECK(clf.accuracy_on(features, labels) <= 0.5 + 1e-9);
}

TEST_CASE("feature pipeline shapes and source naming") {
    SyntheticConfig cfg;
    cfg.windows_per_class = 4;
    cfg.duration_s = 1.0;
    cfg.num_classes = 2;
    Dataset data = make_synthetic_dataset(cfg, 3);

    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    relinear_init(model, 3);
    Rng rng(5);
    QuadraticParams& p0 = model.conv(0).params();
    for (std::size_t j = 0; j < p0.w_b->value.numel(); ++j) {
        p0.w_b->value[j] = 0.05 * rng.normal();
    }

    Tensor raw = qttention_feature_pipeline(model, data, FeatureSource::kRaw);
    CHECK(raw.shape() == std::vector<std::size_t>{8, 2048});

    Tensor fmap = qttention_feature_pipeline(model, data, FeatureSource::kFirstLayerOutput);
    CHECK(fmap.shape() == std::vector<std::size_t>{8, 128});

    Tensor qtt = qttention_feature_pipeline(model, data, FeatureSource::kFirstLayerQttention);
    CHECK(qtt.shape() == std::vector<std::size_t>{8, 2048});
    for (std::size_t i = 0; i < qtt.numel(); ++i) CHECK(qtt[i] >= 0.0);

    CHECK(feature_source_name(FeatureSource::kRaw) == "raw");
    CHECK(feature_source_name(FeatureSource::kFirstLayerQttention) == "first-layer-qttention");
}
