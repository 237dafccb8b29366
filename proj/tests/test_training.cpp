#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qdiag/training.hpp"
#include "support/oracles.hpp"

using namespace qdiag;

namespace {

// tiny two-class dataset: class 0 windows are low-frequency tones, class 1
// high-frequency, linearly separable after the wide first layer
Dataset toy_dataset(std::size_t per_class, std::uint64_t seed) {
    Dataset d;
    d.win_len = 2048;
    d.sample_rate_hz = 12000.0;
    d.class_names = {"low", "high"};
    Rng rng(seed);
    for (std::size_t label = 0; label < 2; ++label) {
        const double freq = label == 0 ? 200.0 : 2400.0;
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor w({2048});
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            for (std::size_t k = 0; k < 2048; ++k) {
                const double t = static_cast<double>(k) / d.sample_rate_hz;
                w[k] = std::sin(2.0 * M_PI * freq * t + phase) + 0.1 * rng.normal();
            }
            d.append(normalize(w), static_cast<std::uint16_t>(label));
        }
    }
    split_dataset(d, 0.5, 0.25, 0.25, seed);
    return d;
}

}  // namespace

TEST_CASE("cross entropy on uniform and confident logits") {
    Tensor uniform({2, 10});
    CrossEntropyResult res = cross_entropy(uniform, {3, 7});
    CHECK(res.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // one-hot-correct logits: loss -> 0 as the margin grows
    double last = res.loss;
    for (double margin : {2.0, 5.0, 10.0, 20.0}) {
        Tensor logits({1, 4});
        logits.at(0, 2) = margin;
        CrossEntropyResult r = cross_entropy(logits, {2});
        CHECK(r.loss < last);
        last = r.loss;
    }
    CHECK(last < 1e-8);

    CHECK_THROWS_AS(cross_entropy(uniform, {3, 11}), std::invalid_argument);
    Tensor bad({1, 3});
    bad[0] = std::nan("");
    CHECK_THROWS_AS(cross_entropy(bad, {0}), std::invalid_argument);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor logits = testing::random_tensor({3, 6}, rng, 2.0);
        std::vector<int> labels{static_cast<int>(rng.index(6)), static_cast<int>(rng.index(6)),
                                static_cast<int>(rng.index(6))};
        auto f = [&](const Tensor& l) { return cross_entropy(l, labels).loss; };
        auto g = [&](const Tensor& l) { return cross_entropy(l, labels).dlogits; };
        CHECK(check_gradient(f, g, logits, 1e-6) < 1e-6);
    }
}

TEST_CASE("sgd_step applies the dual learning rate and zeroes grads") {
    Parameter r("r", Tensor::values({1.0}), LrGroup::kRGroup);
    Parameter gb("gb", Tensor::values({1.0}), LrGroup::kGbGroup);
    r.grad[0] = 0.5;
    gb.grad[0] = 0.5;
    sgd_step({&r, &gb}, 0.1, 0.01);
    CHECK(r.value[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(gb.value[0] == doctest::Approx(0.9995).epsilon(1e-15));
    CHECK(r.grad[0] == 0.0);
    CHECK(gb.grad[0] == 0.0);

    sgd_step({&r, &gb}, 0.1, 0.01);  // zero grad: values unchanged
    CHECK(r.value[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(gb.value[0] == doctest::Approx(0.9995).epsilon(1e-15));
}

TEST_CASE("training fits the separable toy set within 5 epochs") {
    Dataset data = toy_dataset(100, 31);
    Dataset train_set = data.subset(SplitTag::kTrain);
    Dataset val_set = data.subset(SplitTag::kVal);

    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    relinear_init(model, 7);
    TrainConfig cfg;
    cfg.gamma_r = 0.1;
    cfg.alpha = 1e-2;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.seed = 3;
    TrainHistory hist = train(model, train_set, val_set, cfg);
    REQUIRE(hist.epochs.size() == 5);
    double best = 0.0;
    for (const auto& e : hist.epochs) best = std::max(best, e.train_acc);
    CHECK(best >= 0.95);
}

TEST_CASE("alpha = 0 freezes every GB-group parameter exactly") {
    Dataset data = toy_dataset(20, 5);
    Dataset train_set = data.subset(SplitTag::kTrain);
    Dataset val_set = data.subset(SplitTag::kVal);

    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    relinear_init(model, 7);
    TrainConfig cfg;
    cfg.gamma_r = 0.05;
    cfg.alpha = 0.0;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    train(model, train_set, val_set, cfg);
    for (std::size_t i = 0; i < model.num_blocks(); ++i) {
        CHECK(model.conv(i).params().is_relinear_init());
    }
}

TEST_CASE("loss decreases after one step at a small learning rate") {
    Dataset data = toy_dataset(20, 17);
    Dataset train_set = data.subset(SplitTag::kTrain);
    Model model(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    relinear_init(model, 19);
    model.set_threads(1);

    // fixed batch: all train samples
    Tensor batch({train_set.size(), 1, 2048});
    std::vector<int> labels(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const float* src = train_set.window(i);
        for (std::size_t k = 0; k < 2048; ++k) batch[i * 2048 + k] = src[k];
        labels[i] = train_set.labels[i];
    }
    Tensor logits = model.forward(batch, Mode::kTrain);
    CrossEntropyResult before = cross_entropy(logits, labels);
    model.backward(before.dlogits);
    sgd_step(model.parameters(), 1e-3, 1e-2);
    Tensor logits2 = model.forward(batch, Mode::kTrain);
    CrossEntropyResult after = cross_entropy(logits2, labels);
    CHECK(after.loss < before.loss);
}

TEST_CASE("seed-fixed training is fully reproducible") {
    Dataset data = toy_dataset(24, 41);
    Dataset train_set = data.subset(SplitTag::kTrain);
    Dataset val_set = data.subset(SplitTag::kVal);
    TrainConfig cfg;
    cfg.gamma_r = 0.05;
    cfg.alpha = 1e-3;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 101;

    Model m1(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    Model m2(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
    relinear_init(m1, 55);
    relinear_init(m2, 55);
    TrainHistory h1 = train(m1, train_set, val_set, cfg);
    TrainHistory h2 = train(m2, train_set, val_set, cfg);
    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
        CHECK(h1.epochs[e].val_acc == h2.epochs[e].val_acc);
    }
    auto p1 = m1.parameters(), p2 = m2.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        for (std::size_t j = 0; j < p1[i]->value.numel(); ++j) {
            CHECK(p1[i]->value[j] == p2[i]->value[j]);
        }
    }
}

TEST_CASE("default grids match the published search space") {
    CHECK(default_gamma_r_grid() == std::vector<double>{0.1, 0.3, 0.5, 0.8, 0.08, 0.05});
    CHECK(default_alpha_grid() == std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5});
}

TEST_CASE("grid search: single point, tie-breaking, and selection") {
    Dataset data = toy_dataset(24, 43);
    Dataset train_set = data.subset(SplitTag::kTrain);
    Dataset val_set = data.subset(SplitTag::kVal);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 2;

    auto builder = [] {
        Model m(build_backbone(VariantProfile::kQcnnBase, 2048, 2));
        relinear_init(m, 9);
        return m;
    };
    GridPoint single = grid_search(builder, train_set, val_set, {0.1}, {1e-3}, cfg);
    CHECK(single.gamma_r == 0.1);
    CHECK(single.alpha == 1e-3);

    std::vector<GridPoint> all;
    GridPoint best = grid_search(builder, train_set, val_set, {0.1}, {1e-2, 1e-3}, cfg, &all);
    REQUIRE(all.size() == 2);
    double best_acc = std::max(all[0].val_acc, all[1].val_acc);
    CHECK(best.val_acc == best_acc);
    if (all[0].val_acc == all[1].val_acc) {
        CHECK(best.alpha == 1e-3);  // tie goes to the smaller alpha
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.batch_size = 64;
    cfg.gamma_r = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
