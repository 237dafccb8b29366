// Bearing physics, synthetic fault-signal generation, SNR noise injection,
// windowing, normalization, stratified splitting and the dataset file format.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdiag/tensor.hpp"

namespace qdiag {

struct BearingGeometry {
    std::size_t n_balls = 9;
    double ball_d = 0.3126;       // any unit, consistent with pitch_D
    double pitch_D = 1.537;
    double contact_angle_deg = 0.0;

    void validate() const;  // 0 < ball_d < pitch_D, n_balls >= 3, 0 <= angle < 90
};

struct CharacteristicFrequencies {
    double bpfo = 0.0;  // ball pass frequency, outer race
    double bpfi = 0.0;  // ball pass frequency, inner race
    double ftf = 0.0;   // fundamental train (cage) frequency
    double bsf = 0.0;   // ball spin frequency
};

CharacteristicFrequencies characteristic_frequencies(const BearingGeometry& g, double shaft_hz);

enum class FaultMode { kHealthy, kOuter, kInner, kBall };

std::string fault_mode_name(FaultMode m);

struct FaultSpec {
    FaultMode mode = FaultMode::kHealthy;
    double severity = 0.0;       // burst amplitude scale; 0 for healthy
    double resonance_hz = 3000.0;
    double decay_rate = 600.0;   // 1/s
    double slip_fraction = 0.0;  // per-impulse timing jitter, fraction of period

    void validate() const;
};

// Shaft tone (1x plus a weaker 2x harmonic), an exponentially decaying
// resonance burst per defect impact, and a Gaussian noise floor. Inner-race
// bursts are amplitude modulated at the shaft rate, ball bursts at the cage
// rate. Deterministic per seed.
Tensor synthesize_fault_signal(const FaultSpec& spec, const BearingGeometry& g, double shaft_hz,
                               double sample_rate_hz, double duration_s, double noise_floor,
                               std::uint64_t seed);

// Additive Gaussian noise at the requested SNR: Pn = Ps / 10^(snr_db/10)
// with Ps the mean square of x. Applied before normalization.
Tensor add_noise_snr(const Tensor& x, double snr_db, std::uint64_t seed);

// `count` windows of length win_len at uniform random start offsets (drawn
// with replacement).
Tensor extract_windows(const Tensor& signal, std::size_t win_len, std::size_t count,
                       std::uint64_t seed);

// Scale into [-1, 1] by the max absolute value; zero-preserving.
Tensor normalize(const Tensor& window);

enum class SplitTag : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct Dataset {
    std::size_t win_len = 0;
    double sample_rate_hz = 0.0;
    std::vector<std::string> class_names;       // at most 10 classes
    std::vector<float> windows;                 // [N, win_len] row-major
    std::vector<std::uint16_t> labels;          // [N]
    std::vector<SplitTag> splits;               // [N]

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    const float* window(std::size_t i) const { return windows.data() + i * win_len; }
    Tensor window_tensor(std::size_t i) const;  // [1, win_len] double

    void append(const Tensor& window, std::uint16_t label, SplitTag split = SplitTag::kTrain);
    Dataset subset(SplitTag tag) const;
    std::vector<std::size_t> class_counts() const;
    void validate() const;
};

// Stratified per-class split with a seeded shuffle; counts match the ratios
// within +-1 per class. Classes with fewer than 4 samples are rejected.
void split_dataset(Dataset& dataset, double train_ratio, double val_ratio, double test_ratio,
                   std::uint64_t seed);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Per-window noise injection at a fixed SNR followed by renormalization;
// window i uses the seed stream (seed, i). No-op when snr_db is NaN.
Dataset with_noise(const Dataset& clean, double snr_db, std::uint64_t seed);

struct SyntheticConfig {
    BearingGeometry geometry;
    double sample_rate_hz = 12000.0;
    double shaft_hz = 30.0;              // 1800 r/min
    double duration_s = 47.0;            // long signal per class
    std::size_t windows_per_class = 1000;
    std::size_t win_len = 2048;
    double noise_floor = 0.05;
    double resonance_hz = 3000.0;
    double decay_rate = 600.0;
    std::size_t num_classes = 10;        // healthy + {ball,outer,inner} x {minor,moderate,severe}
};

// Class recipe of the default ten-class rig: label 0 healthy, then ball,
// outer, inner at severities 0.5 / 1.0 / 2.0.
FaultSpec class_fault_spec(const SyntheticConfig& cfg, std::size_t label);
std::vector<std::string> default_class_names(std::size_t num_classes);

// Generates the long per-class signals, extracts and normalizes windows, and
// applies the stratified 0.5/0.25/0.25 split.
Dataset make_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace qdiag
