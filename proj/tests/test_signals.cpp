#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "qdiag/signals.hpp"
#include "qdiag/spectrum.hpp"

using namespace qdiag;

TEST_CASE("characteristic frequencies: published 6205 values at 1797 r/min") {
    BearingGeometry g;  // defaults are the 6205 drive-end geometry
    const double fr = 1797.0 / 60.0;
    CharacteristicFrequencies f = characteristic_frequencies(g, fr);
    // independently computed (spreadsheet oracle): 107.364 / 162.186 / 70.584
    CHECK(f.bpfo == doctest::Approx(107.364).epsilon(0.005));
    CHECK(f.bpfi == doctest::Approx(162.186).epsilon(0.005));
    CHECK(f.bsf == doctest::Approx(70.5838).epsilon(0.005));
    CHECK(f.bpfo + f.bpfi == doctest::Approx(9.0 * fr).epsilon(1e-12));
}

TEST_CASE("characteristic frequencies: symmetric small-ball limit") {
    BearingGeometry g;
    g.ball_d = 1e-9;
    g.pitch_D = 1.0;
    g.n_balls = 8;
    CharacteristicFrequencies f = characteristic_frequencies(g, 10.0);
    CHECK(f.bpfo == doctest::Approx(40.0).epsilon(1e-6));
    CHECK(f.bpfi == doctest::Approx(40.0).epsilon(1e-6));
    CHECK(f.ftf == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("characteristic frequency identities over random geometries") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        BearingGeometry g;
        g.n_balls = 3 + rng.index(20);
        g.pitch_D = 0.5 + rng.uniform();
        g.ball_d = g.pitch_D * (0.05 + 0.4 * rng.uniform());
        g.contact_angle_deg = 80.0 * rng.uniform();
        const double fr = 1.0 + 100.0 * rng.uniform();
        CharacteristicFrequencies f = characteristic_frequencies(g, fr);
        CHECK(f.bpfo < f.bpfi);
        CHECK(f.ftf == doctest::Approx(f.bpfo / static_cast<double>(g.n_balls)).epsilon(1e-12));
        CHECK(f.bpfo + f.bpfi ==
              doctest::Approx(static_cast<double>(g.n_balls) * fr).epsilon(1e-12));
    }
    BearingGeometry bad;
    bad.ball_d = 2.0;
    bad.pitch_D = 1.0;
    CHECK_THROWS_AS(characteristic_frequencies(bad, 10.0), std::invalid_argument);
}

TEST_CASE("healthy synthesis is shaft tone plus noise") {
    FaultSpec spec;  // healthy, severity 0
    BearingGeometry g;
    Tensor x = synthesize_fault_signal(spec, g, 30.0, 12000.0, 0.5, 0.0, 3);
    CHECK(x.numel() == 6000);
    // dominant raw-spectrum line at the shaft frequency
    Spectrum s = magnitude_spectrum(std::span(x.data(), x.numel()), 12000.0);
    std::size_t best = 1;
    for (std::size_t k = 2; k < s.size(); ++k) {
        if (s.magnitudes[k] > s.magnitudes[best]) best = k;
    }
    CHECK(s.freqs[best] == doctest::Approx(30.0).epsilon(0.05));

    FaultSpec invalid;
    invalid.severity = 1.0;  // healthy must have severity 0
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);

    FaultSpec nyq;
    nyq.mode = FaultMode::kOuter;
    nyq.severity = 1.0;
    nyq.resonance_hz = 7000.0;
    CHECK_THROWS_AS(static_cast<void>(synthesize_fault_signal(nyq, g, 30.0, 12000.0, 1.0, 0.0, 1)),
                    std::invalid_argument);
}

TEST_CASE("generator round-trip: envelope peak lands on the fault frequency") {
    BearingGeometry g;
    const double fs = 12000.0, fr = 30.0;
    CharacteristicFrequencies cf = characteristic_frequencies(g, fr);
    struct Case {
        FaultMode mode;
        double fc;
    };
    const Case cases[] = {{FaultMode::kOuter, cf.bpfo},
                          {FaultMode::kInner, cf.bpfi},
                          {FaultMode::kBall, cf.bsf}};
    for (const Case& c : cases) {
        int hits = 0;
        const int seeds = 50;
        for (int seed = 0; seed < seeds; ++seed) {
            FaultSpec spec;
            spec.mode = c.mode;
            spec.severity = 1.0;
            if (c.mode == FaultMode::kBall) {
                spec.slip_fraction = 0.01;
                spec.decay_rate = 300.0;
            }
            Tensor x = synthesize_fault_signal(spec, g, fr, fs, 1.0, 0.05, 1000 + seed);
            Spectrum s = envelope_spectrum(std::span(x.data(), x.numel()), fs);
            // dominant peak excluding DC and the shaft line
            const std::size_t shaft_bin = s.bin_of(fr);
            std::size_t best = 0;
            double best_mag = -1.0;
            for (std::size_t k = 2; k < s.size(); ++k) {
                if (k + 1 >= shaft_bin && k <= shaft_bin + 1) continue;
                if (s.magnitudes[k] > best_mag) {
                    best_mag = s.magnitudes[k];
                    best = k;
                }
            }
            if (std::abs(s.freqs[best] - c.fc) <= s.resolution_hz + 1e-9) ++hits;
        }
        CHECK_MESSAGE(hits == seeds, fault_mode_name(c.mode), ": ", hits, "/", seeds);
    }
}

TEST_CASE("inner race fault shows shaft-rate sidebands in the envelope") {
    BearingGeometry g;
    const double fs = 12000.0, fr = 30.0;
    CharacteristicFrequencies cf = characteristic_frequencies(g, fr);
    FaultSpec spec;
    spec.mode = FaultMode::kInner;
    spec.severity = 1.5;
    Tensor x = synthesize_fault_signal(spec, g, fr, fs, 2.0, 0.02, 9);
    Spectrum s = envelope_spectrum(std::span(x.data(), x.numel()), fs);
    const double targets[] = {cf.bpfi, cf.bpfi - fr, cf.bpfi + fr};
    auto matches = match_peaks(s, targets, 3);
    CHECK(matches[0].found);
    CHECK(matches[1].found);
    CHECK(matches[2].found);
}

TEST_CASE("snr injection: formula cases and statistical fidelity") {
    // Ps = 1, snr 0 dB: Pn = 1. Ps = 2, snr 10 dB: Pn = 0.2.
    Tensor unit({4096});
    Rng rng(5);
    for (std::size_t i = 0; i < unit.numel(); ++i) unit[i] = std::sin(0.37 * i);

    for (double target : {-6.0, 0.0, 6.0}) {
        double mean_snr = 0.0;
        const int trials = 100;
        for (int t = 0; t < trials; ++t) {
            Tensor w({2048});
            for (std::size_t i = 0; i < w.numel(); ++i) w[i] = unit[i + t % 100];
            Tensor noisy = add_noise_snr(w, target, 900 + t);
            double ps = 0.0, pn = 0.0;
            for (std::size_t i = 0; i < w.numel(); ++i) {
                ps += w[i] * w[i];
                const double n = noisy[i] - w[i];
                pn += n * n;
            }
            mean_snr += 10.0 * std::log10(ps / pn);
        }
        mean_snr /= trials;
        CHECK_MESSAGE(std::abs(mean_snr - target) < 0.1, "target ", target, " measured ",
                      mean_snr);
    }

    Tensor zeros({16});
    CHECK_THROWS_AS(static_cast<void>(add_noise_snr(zeros, 0.0, 1)), std::invalid_argument);
}

TEST_CASE("noise injection is unbiased") {
    Tensor base({512});
    for (std::size_t i = 0; i < base.numel(); ++i) base[i] = std::cos(0.11 * i);
    double mean = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        Tensor noisy = add_noise_snr(base, 0.0, 31 + t);
        for (std::size_t i = 0; i < base.numel(); ++i) mean += noisy[i] - base[i];
    }
    mean /= static_cast<double>(trials) * base.numel();
    CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("window extraction: bounds, determinism, degenerate case") {
    Rng rng(3);
    Tensor signal({4096});
    for (std::size_t i = 0; i < signal.numel(); ++i) signal[i] = rng.normal();

    Tensor w1 = extract_windows(signal, 2048, 5, 77);
    Tensor w2 = extract_windows(signal, 2048, 5, 77);
    for (std::size_t i = 0; i < w1.numel(); ++i) CHECK(w1[i] == w2[i]);

    // L == win_len: only one start offset exists
    Tensor exact({2048});
    for (std::size_t i = 0; i < exact.numel(); ++i) exact[i] = rng.normal();
    Tensor w3 = extract_windows(exact, 2048, 3, 5);
    for (std::size_t w = 0; w < 3; ++w) {
        for (std::size_t k = 0; k < 2048; ++k) CHECK(w3.at(w, k) == exact[k]);
    }

    CHECK_THROWS_AS(extract_windows(Tensor({64}), 2048, 1, 0), std::invalid_argument);
}

TEST_CASE("normalization is max-abs with fixed point and sign preservation") {
    Tensor w = Tensor::values({-2.0, 0.0, 4.0});
    Tensor n = normalize(w);
    CHECK(n[0] == -0.5);
    CHECK(n[1] == 0.0);
    CHECK(n[2] == 1.0);

    Tensor again = normalize(n);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again[i] == n[i]);

    Rng rng(9);
    Tensor r({64});
    for (std::size_t i = 0; i < r.numel(); ++i) r[i] = rng.normal();
    Tensor rn = normalize(r);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < r.numel(); ++i) {
        CHECK(std::signbit(rn[i]) == std::signbit(r[i]));
        max_abs = std::max(max_abs, std::abs(rn[i]));
    }
    CHECK(max_abs == 1.0);

    CHECK_THROWS_AS(normalize(Tensor({8})), std::invalid_argument);
}

TEST_CASE("stratified split: exact counts, partition, small-class rejection") {
    SyntheticConfig cfg;
    cfg.windows_per_class = 40;
    cfg.duration_s = 2.0;
    cfg.num_classes = 4;
    Dataset d = make_synthetic_dataset(cfg, 5);
    REQUIRE(d.size() == 160);

    std::vector<std::size_t> train_counts(4, 0), val_counts(4, 0), test_counts(4, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        switch (d.splits[i]) {
            case SplitTag::kTrain: ++train_counts[d.labels[i]]; break;
            case SplitTag::kVal: ++val_counts[d.labels[i]]; break;
            case SplitTag::kTest: ++test_counts[d.labels[i]]; break;
        }
    }
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(train_counts[c] == 20);
        CHECK(val_counts[c] == 10);
        CHECK(test_counts[c] == 10);
    }

    Dataset tiny;
    tiny.win_len = 8;
    tiny.sample_rate_hz = 1.0;
    tiny.class_names = {"a", "b"};
    Rng rng(3);
    for (int i = 0; i < 3; ++i) {
        Tensor w({8});
        for (std::size_t k = 0; k < 8; ++k) w[k] = rng.normal();
        tiny.append(normalize(w), 0);
    }
    Tensor w({8});
    for (std::size_t k = 0; k < 8; ++k) w[k] = rng.normal();
    tiny.append(normalize(w), 1);
    CHECK_THROWS_AS(split_dataset(tiny, 0.5, 0.25, 0.25, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(tiny, 0.5, 0.25, 0.3, 1), std::invalid_argument);
}

TEST_CASE("dataset file round-trip and error cases") {
    SyntheticConfig cfg;
    cfg.windows_per_class = 8;
    cfg.duration_s = 1.0;
    cfg.num_classes = 3;
    Dataset d = make_synthetic_dataset(cfg, 21);

    const std::string path =
        (std::filesystem::temp_directory_path() / "qdiag_ds_test.qbrg").string();
    save_dataset(d, path);
    Dataset back = load_dataset(path);
    CHECK(back.size() == d.size());
    CHECK(back.win_len == d.win_len);
    CHECK(back.sample_rate_hz == d.sample_rate_hz);
    CHECK(back.class_names == d.class_names);
    CHECK(back.labels == d.labels);
    for (std::size_t i = 0; i < d.windows.size(); ++i) CHECK(back.windows[i] == d.windows[i]);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("ZZZZ", 4);
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(path)), doctest::Contains("magic"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("default ten-class recipe covers all modes and severities") {
    SyntheticConfig cfg;
    CHECK(default_class_names(10).size() == 10);
    CHECK(class_fault_spec(cfg, 0).mode == FaultMode::kHealthy);
    CHECK(class_fault_spec(cfg, 0).severity == 0.0);
    std::multiset<double> severities;
    for (std::size_t label = 1; label < 10; ++label) {
        severities.insert(class_fault_spec(cfg, label).severity);
    }
    CHECK(severities == std::multiset<double>{0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0});
    CHECK(class_fault_spec(cfg, 1).mode == FaultMode::kBall);
    CHECK(class_fault_spec(cfg, 4).mode == FaultMode::kOuter);
    CHECK(class_fault_spec(cfg, 7).mode == FaultMode::kInner);
    CHECK(class_fault_spec(cfg, 1).slip_fraction == 0.01);
}

TEST_CASE("noisy dataset copies stay normalized and deterministic") {
    SyntheticConfig cfg;
    cfg.windows_per_class = 6;
    cfg.duration_s = 1.0;
    cfg.num_classes = 2;
    Dataset clean = make_synthetic_dataset(cfg, 8);
    Dataset n1 = with_noise(clean, -4.0, 99);
    Dataset n2 = with_noise(clean, -4.0, 99);
    CHECK(n1.windows == n2.windows);
    n1.validate();
    bool differs = false;
    for (std::size_t i = 0; i < n1.windows.size(); ++i) {
        if (n1.windows[i] != clean.windows[i]) differs = true;
    }
    CHECK(differs);
}
