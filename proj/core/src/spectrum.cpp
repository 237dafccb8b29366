#include "qdiag/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qdiag {

void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft_radix2 needs a power-of-two length, got " +
                                    std::to_string(n));
    }
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> w_len(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= w_len;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv_n;
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::vector<std::complex<double>> fft(std::span<const double> x) {
    if (x.size() < 2) throw std::invalid_argument("fft needs at least 2 samples");
    std::vector<std::complex<double>> buf(next_pow2(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
    fft_radix2(buf, false);
    return buf;
}

Tensor hilbert_envelope(std::span<const double> x) {
    if (x.size() < 4) throw std::invalid_argument("hilbert_envelope needs at least 4 samples");
    const std::size_t n_fft = next_pow2(x.size());
    std::vector<std::complex<double>> buf(n_fft);
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
    fft_radix2(buf, false);
    // analytic signal: keep DC and Nyquist, double positives, zero negatives
    for (std::size_t k = 1; k < n_fft / 2; ++k) buf[k] *= 2.0;
    for (std::size_t k = n_fft / 2 + 1; k < n_fft; ++k) buf[k] = 0.0;
    fft_radix2(buf, true);
    Tensor env({x.size()});
    for (std::size_t i = 0; i < x.size(); ++i) env[i] = std::abs(buf[i]);
    return env;
}

std::size_t Spectrum::bin_of(double freq_hz) const {
    if (resolution_hz <= 0.0 || freqs.empty()) throw std::runtime_error("empty spectrum");
    const double idx = freq_hz / resolution_hz;
    const std::size_t bin = static_cast<std::size_t>(std::llround(idx));
    return std::min(bin, freqs.size() - 1);
}

namespace {

Spectrum one_sided(std::vector<double> signal, double sample_rate_hz, bool hann) {
    if (hann) {
        const std::size_t n = signal.size();
        for (std::size_t i = 0; i < n; ++i) {
            signal[i] *= 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                               static_cast<double>(n - 1)));
        }
    }
    const auto spec = fft(signal);
    const std::size_t n_fft = spec.size();
    Spectrum out;
    out.resolution_hz = sample_rate_hz / static_cast<double>(n_fft);
    const std::size_t bins = n_fft / 2 + 1;
    out.freqs.resize(bins);
    out.magnitudes.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        out.freqs[k] = out.resolution_hz * static_cast<double>(k);
        out.magnitudes[k] = std::abs(spec[k]);
    }
    return out;
}

}  // namespace

Spectrum envelope_spectrum(std::span<const double> x, double sample_rate_hz, bool hann) {
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be > 0");
    Tensor env = hilbert_envelope(x);
    double mean = 0.0;
    for (std::size_t i = 0; i < env.numel(); ++i) mean += env[i];
    mean /= static_cast<double>(env.numel());
    std::vector<double> centered(env.numel());
    for (std::size_t i = 0; i < env.numel(); ++i) centered[i] = env[i] - mean;
    return one_sided(std::move(centered), sample_rate_hz, hann);
}

Spectrum magnitude_spectrum(std::span<const double> x, double sample_rate_hz, bool hann) {
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be > 0");
    return one_sided(std::vector<double>(x.begin(), x.end()), sample_rate_hz, hann);
}

namespace {

double median_magnitude(const Spectrum& s) {
    std::vector<double> mags = s.magnitudes;
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    return mags[mags.size() / 2];
}

bool is_local_max(const Spectrum& s, std::size_t k) {
    const auto& m = s.magnitudes;
    const double left = k > 0 ? m[k - 1] : -1.0;
    const double right = k + 1 < m.size() ? m[k + 1] : -1.0;
    return m[k] >= left && m[k] >= right;
}

}  // namespace

std::vector<PeakMatch> match_peaks(const Spectrum& s, std::span<const double> targets_hz,
                                   int tol_bins, double prominence_factor) {
    if (tol_bins < 1) throw std::invalid_argument("tol_bins must be >= 1");
    if (s.freqs.empty()) throw std::invalid_argument("empty spectrum");
    const double nyquist = s.freqs.back();
    const double median = median_magnitude(s);
    const double floor = std::max(median, 1e-30);
    const double threshold = prominence_factor * floor;

    std::vector<PeakMatch> out;
    out.reserve(targets_hz.size());
    for (double target : targets_hz) {
        if (target > nyquist) {
            throw std::invalid_argument("peak target " + std::to_string(target) +
                                        " Hz beyond Nyquist " + std::to_string(nyquist) + " Hz");
        }
        PeakMatch pm;
        pm.target_hz = target;
        const std::size_t center = s.bin_of(target);
        const std::size_t lo = center >= static_cast<std::size_t>(tol_bins)
                                   ? center - static_cast<std::size_t>(tol_bins)
                                   : 0;
        const std::size_t hi = std::min(center + static_cast<std::size_t>(tol_bins),
                                        s.size() - 1);
        for (std::size_t k = lo; k <= hi; ++k) {
            if (!is_local_max(s, k)) continue;
            if (s.magnitudes[k] < threshold) continue;
            if (!pm.found || s.magnitudes[k] > pm.magnitude) {
                pm.found = true;
                pm.freq_hz = s.freqs[k];
                pm.magnitude = s.magnitudes[k];
                pm.prominence = s.magnitudes[k] / floor;
            }
        }
        if (!pm.found) {
            // report the strongest bin anyway so callers can inspect it
            std::size_t best = lo;
            for (std::size_t k = lo; k <= hi; ++k) {
                if (s.magnitudes[k] > s.magnitudes[best]) best = k;
            }
            pm.freq_hz = s.freqs[best];
            pm.magnitude = s.magnitudes[best];
            pm.prominence = s.magnitudes[best] / floor;
        }
        out.push_back(pm);
    }
    return out;
}

double magnitude_near(const Spectrum& s, double target_hz, int tol_bins) {
    const std::size_t center = s.bin_of(target_hz);
    const std::size_t lo =
        center >= static_cast<std::size_t>(tol_bins) ? center - static_cast<std::size_t>(tol_bins) : 0;
    const std::size_t hi = std::min(center + static_cast<std::size_t>(tol_bins), s.size() - 1);
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) best = std::max(best, s.magnitudes[k]);
    return best;
}

void write_spectrum_csv(const Spectrum& s, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "freq_hz,magnitude\n";
    char line[80];
    for (std::size_t k = 0; k < s.size(); ++k) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g\n", s.freqs[k], s.magnitudes[k]);
        os << line;
    }
    if (!os) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace qdiag
