// Radix-2 FFT, analytic-signal envelope extraction, one-sided envelope
// spectra and characteristic-frequency peak matching.

#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qdiag/tensor.hpp"

namespace qdiag {

// In-place iterative radix-2 transform; x.size() must be a power of two.
// Convention: X_k = sum_n x_n exp(-2*pi*i*k*n/N); the inverse divides by N.
void fft_radix2(std::vector<std::complex<double>>& x, bool inverse);

std::size_t next_pow2(std::size_t n);

// DFT of a real signal; non-power-of-two lengths are zero-padded to the next
// power of two, so the returned size may exceed x.size().
std::vector<std::complex<double>> fft(std::span<const double> x);

// Magnitude of the analytic signal (negative frequencies zeroed, positive
// doubled, DC and Nyquist kept). Same length as the input. Needs N >= 4.
Tensor hilbert_envelope(std::span<const double> x);

struct Spectrum {
    std::vector<double> freqs;       // 0 .. fs/2, strictly increasing
    std::vector<double> magnitudes;  // >= 0
    double resolution_hz = 0.0;      // fs / N_fft

    std::size_t size() const { return freqs.size(); }
    std::size_t bin_of(double freq_hz) const;  // nearest bin
};

// One-sided magnitude spectrum of the mean-removed envelope. The optional
// Hann taper is off by default; impulsive content is the signal of interest.
Spectrum envelope_spectrum(std::span<const double> x, double sample_rate_hz, bool hann = false);

// One-sided magnitude spectrum of the raw signal (no envelope step).
Spectrum magnitude_spectrum(std::span<const double> x, double sample_rate_hz, bool hann = false);

struct PeakMatch {
    double target_hz = 0.0;
    bool found = false;
    double freq_hz = 0.0;     // location of the best local maximum near target
    double magnitude = 0.0;
    double prominence = 0.0;  // magnitude / median magnitude
};

// A target is found when a local maximum within +-tol_bins rises above
// prominence_factor times the median spectrum magnitude.
std::vector<PeakMatch> match_peaks(const Spectrum& s, std::span<const double> targets_hz,
                                   int tol_bins, double prominence_factor = 3.0);

// Largest magnitude within +-tol_bins of the target frequency.
double magnitude_near(const Spectrum& s, double target_hz, int tol_bins);

void write_spectrum_csv(const Spectrum& s, const std::string& path);  // freq_hz,magnitude

}  // namespace qdiag
