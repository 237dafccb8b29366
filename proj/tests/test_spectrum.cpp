#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "qdiag/spectrum.hpp"
#include "support/oracles.hpp"

using namespace qdiag;

TEST_CASE("fft: unit impulse gives a flat spectrum") {
    std::vector<double> x(16, 0.0);
    x[0] = 1.0;
    auto spec = fft(x);
    REQUIRE(spec.size() == 16);
    for (const auto& v : spec) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fft: cosine at bin 3 of 8 puts N/2 in bins 3 and 5") {
    std::vector<double> x(8);
    for (std::size_t n = 0; n < 8; ++n) x[n] = std::cos(2.0 * M_PI * 3.0 * n / 8.0);
    auto spec = fft(x);
    for (std::size_t k = 0; k < 8; ++k) {
        const double expected = (k == 3 || k == 5) ? 4.0 : 0.0;
        CHECK(std::abs(spec[k]) == doctest::Approx(expected).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("fft matches the naive DFT oracle") {
    Rng rng(3);
    for (std::size_t n : {8, 32, 128}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal();
        auto fast = fft(x);
        auto slow = qdiag::testing::naive_dft(x);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(fast[k] - slow[k]) < 1e-9 * std::max(1.0, std::abs(slow[k])));
        }
    }
}

TEST_CASE("fft: Parseval identity and round-trip") {
    Rng rng(7);
    for (std::size_t n : {16, 256, 4096}) {
        std::vector<std::complex<double>> x(n);
        std::vector<double> xr(n);
        double time_energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            xr[i] = rng.normal();
            x[i] = xr[i];
            time_energy += xr[i] * xr[i];
        }
        auto spec = fft(xr);
        double freq_energy = 0.0;
        for (const auto& v : spec) freq_energy += std::norm(v);
        CHECK(time_energy ==
              doctest::Approx(freq_energy / static_cast<double>(n)).epsilon(1e-9));

        fft_radix2(x, false);
        fft_radix2(x, true);
        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::abs(x[i] - xr[i]));
        CHECK(max_err < 1e-9);
    }
    std::vector<std::complex<double>> bad(6);
    CHECK_THROWS_AS(fft_radix2(bad, false), std::invalid_argument);
}

TEST_CASE("fft zero-pads non-power-of-two lengths") {
    std::vector<double> x(1000, 0.0);
    x[0] = 1.0;
    auto spec = fft(x);
    CHECK(spec.size() == 1024);
}

TEST_CASE("hilbert envelope of a pure tone is its amplitude") {
    const double amp = 2.5, freq = 50.0, fs = 1000.0;
    const std::size_t n = 1024;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::cos(2.0 * M_PI * freq * i / fs);
    Tensor env = hilbert_envelope(x);
    // interior samples, edges excluded
    for (std::size_t i = n / 8; i < n - n / 8; ++i) {
        CHECK(env[i] == doctest::Approx(amp).epsilon(0.01));
    }
    // envelope dominates the signal magnitude
    for (std::size_t i = 0; i < n; ++i) CHECK(env[i] >= std::abs(x[i]) - 1e-6);
}

TEST_CASE("hilbert envelope is invariant to carrier sign flip") {
    Rng rng(5);
    const std::size_t n = 512;
    std::vector<double> x(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::cos(0.3 * i) * (1.0 + 0.2 * std::cos(0.01 * i)) + 0.01 * rng.normal();
        neg[i] = -x[i];
    }
    Tensor a = hilbert_envelope(x);
    Tensor b = hilbert_envelope(neg);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("am signal: envelope tracks the modulator, spectrum finds it") {
    const double fs = 1000.0, fm = 5.0, fc = 50.0;
    const std::size_t n = 1024;
    std::vector<double> x(n), modulator(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i / fs;
        modulator[i] = 1.0 + 0.5 * std::cos(2.0 * M_PI * fm * t);
        x[i] = modulator[i] * std::cos(2.0 * M_PI * fc * t);
    }
    Tensor env = hilbert_envelope(x);
    double rmse = 0.0;
    std::size_t count = 0;
    for (std::size_t i = n / 8; i < n - n / 8; ++i) {
        rmse += (env[i] - modulator[i]) * (env[i] - modulator[i]);
        ++count;
    }
    rmse = std::sqrt(rmse / count);
    CHECK(rmse < 0.02);

    Spectrum s = envelope_spectrum(x, fs);
    std::size_t best = 1;
    for (std::size_t k = 2; k < s.size(); ++k) {
        if (s.magnitudes[k] > s.magnitudes[best]) best = k;
    }
    CHECK(std::abs(s.freqs[best] - fm) <= s.resolution_hz);
}

TEST_CASE("pure tone leaves no envelope line above the floor") {
    const double fs = 1000.0;
    const std::size_t n = 2048;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * 75.0 * i / fs);
    Spectrum s = envelope_spectrum(x, fs);
    // skip DC (mean already removed) and edge-effect bins near zero
    double max_line = 0.0;
    for (std::size_t k = 4; k < s.size(); ++k) max_line = std::max(max_line, s.magnitudes[k]);
    // a genuine AM line at these lengths is O(100); edge ripple stays tiny
    CHECK(max_line < 5.0);
}

TEST_CASE("match_peaks: injected tone found, flat noise not, Nyquist rejected") {
    const double fs = 1000.0;
    const std::size_t n = 2048;
    Rng rng(11);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i / fs;
        x[i] = (1.0 + 0.8 * std::cos(2.0 * M_PI * 20.0 * t)) * std::cos(2.0 * M_PI * 200.0 * t) +
               0.05 * rng.normal();
    }
    Spectrum s = envelope_spectrum(x, fs);
    const double targets[] = {20.0, 133.0};
    auto matches = match_peaks(s, targets, 2);
    CHECK(matches[0].found);
    CHECK(matches[0].freq_hz == doctest::Approx(20.0).epsilon(0.05));
    CHECK_FALSE(matches[1].found);
    CHECK(matches[0].prominence > matches[1].prominence);

    const double beyond[] = {600.0};
    CHECK_THROWS_AS(static_cast<void>(match_peaks(s, beyond, 2)), std::invalid_argument);
}

TEST_CASE("spectrum csv export") {
    const double fs = 100.0;
    std::vector<double> x(64);
    for (std::size_t i = 0; i < 64; ++i) x[i] = std::sin(0.3 * i);
    Spectrum s = magnitude_spectrum(x, fs);
    const std::string path =
        (std::filesystem::temp_directory_path() / "qdiag_spec_test.csv").string();
    write_spectrum_csv(s, path);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "freq_hz,magnitude");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == s.size());
    std::remove(path.c_str());
}

TEST_CASE("hann taper is available and changes leakage") {
    const double fs = 1000.0;
    std::vector<double> x(512);
    for (std::size_t i = 0; i < 512; ++i) x[i] = std::cos(2.0 * M_PI * 52.7 * i / fs);
    Spectrum plain = magnitude_spectrum(x, fs, false);
    Spectrum hann = magnitude_spectrum(x, fs, true);
    CHECK(plain.size() == hann.size());
    // the tapered far-field leakage is lower
    double leak_plain = 0.0, leak_hann = 0.0;
    for (std::size_t k = plain.size() - 40; k < plain.size(); ++k) {
        leak_plain += plain.magnitudes[k];
        leak_hann += hann.magnitudes[k];
    }
    CHECK(leak_hann < leak_plain);
}
