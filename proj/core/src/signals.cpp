#include "qdiag/signals.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace qdiag {

namespace {

constexpr char kMagic[4] = {'Q', 'B', 'R', 'G'};
constexpr std::uint32_t kVersion = 1;

double deg_to_rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace

void BearingGeometry::validate() const {
    if (n_balls < 3) throw std::invalid_argument("bearing needs n_balls >= 3");
    if (!(ball_d > 0.0 && ball_d < pitch_D)) {
        throw std::invalid_argument("bearing needs 0 < ball_d < pitch_D");
    }
    if (!(contact_angle_deg >= 0.0 && contact_angle_deg < 90.0)) {
        throw std::invalid_argument("contact angle must be in [0, 90) degrees");
    }
}

CharacteristicFrequencies characteristic_frequencies(const BearingGeometry& g, double shaft_hz) {
    g.validate();
    if (!(shaft_hz > 0.0)) throw std::invalid_argument("shaft frequency must be > 0");
    const double ratio = g.ball_d / g.pitch_D * std::cos(deg_to_rad(g.contact_angle_deg));
    const double n = static_cast<double>(g.n_balls);
    CharacteristicFrequencies f;
    f.bpfo = n * shaft_hz / 2.0 * (1.0 - ratio);
    f.bpfi = n * shaft_hz / 2.0 * (1.0 + ratio);
    f.ftf = shaft_hz / 2.0 * (1.0 - ratio);
    f.bsf = g.pitch_D * shaft_hz / (2.0 * g.ball_d) * (1.0 - ratio * ratio);
    return f;
}

std::string fault_mode_name(FaultMode m) {
    switch (m) {
        case FaultMode::kHealthy: return "healthy";
        case FaultMode::kOuter: return "outer";
        case FaultMode::kInner: return "inner";
        case FaultMode::kBall: return "ball";
    }
    return "?";
}

void FaultSpec::validate() const {
    if (severity < 0.0) throw std::invalid_argument("fault severity must be >= 0");
    if (mode == FaultMode::kHealthy && severity != 0.0) {
        throw std::invalid_argument("healthy bearing must have severity 0");
    }
    if (!(slip_fraction >= 0.0 && slip_fraction <= 0.05)) {
        throw std::invalid_argument("slip_fraction must be in [0, 0.05]");
    }
    if (resonance_hz <= 0.0 || decay_rate <= 0.0) {
        throw std::invalid_argument("resonance_hz and decay_rate must be > 0");
    }
}

Tensor synthesize_fault_signal(const FaultSpec& spec, const BearingGeometry& g, double shaft_hz,
                               double sample_rate_hz, double duration_s, double noise_floor,
                               std::uint64_t seed) {
    spec.validate();
    if (!(sample_rate_hz > 2.0 * spec.resonance_hz)) {
        throw std::invalid_argument("sample rate " + std::to_string(sample_rate_hz) +
                                    " violates Nyquist for resonance " +
                                    std::to_string(spec.resonance_hz) + " Hz");
    }
    const CharacteristicFrequencies cf = characteristic_frequencies(g, shaft_hz);
    double impact_hz = 0.0;
    switch (spec.mode) {
        case FaultMode::kHealthy: break;
        case FaultMode::kOuter: impact_hz = cf.bpfo; break;
        case FaultMode::kInner: impact_hz = cf.bpfi; break;
        case FaultMode::kBall: impact_hz = cf.bsf; break;
    }
    if (spec.mode != FaultMode::kHealthy && duration_s * impact_hz < 5.0) {
        throw std::invalid_argument("duration too short: fewer than 5 fault impulses");
    }

    const std::size_t len = static_cast<std::size_t>(std::llround(sample_rate_hz * duration_s));
    Tensor out({len});
    Rng rng(seed);

    // Shaft component: 1x tone plus a weaker 2x harmonic. The harmonic pair
    // spaced shaft_hz apart is what puts the shaft line into the envelope
    // spectrum, as unbalance and misalignment do on a real rig. Kept well
    // below the burst amplitudes so shaft-burst beat lines stay under the
    // fault comb.
    const double shaft_amp = 0.15;
    const double shaft2_amp = 0.06;
    const double phase1 = rng.uniform(0.0, 2.0 * M_PI);
    const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        out[i] = shaft_amp * std::sin(2.0 * M_PI * shaft_hz * t + phase1) +
                 shaft2_amp * std::sin(4.0 * M_PI * shaft_hz * t + phase2);
    }

    if (spec.mode != FaultMode::kHealthy && spec.severity > 0.0) {
        const double period = 1.0 / impact_hz;
        // burst is effectively zero after ~8 time constants
        const std::size_t burst_len = std::min(
            len, static_cast<std::size_t>(std::ceil(8.0 / spec.decay_rate * sample_rate_hz)));
        double mod_hz = 0.0;  // amplitude modulation of the impact train
        if (spec.mode == FaultMode::kInner) mod_hz = shaft_hz;
        if (spec.mode == FaultMode::kBall) mod_hz = cf.ftf;

        for (double t0 = 0.0; t0 < duration_s; t0 += period) {
            const double jitter = spec.slip_fraction > 0.0
                                      ? rng.uniform(-spec.slip_fraction, spec.slip_fraction) * period
                                      : 0.0;
            const double t_hit = t0 + jitter;
            if (t_hit < 0.0) continue;
            double amp = spec.severity;
            if (mod_hz > 0.0) amp *= 1.0 + 0.5 * std::cos(2.0 * M_PI * mod_hz * t_hit);
            const std::size_t start = static_cast<std::size_t>(t_hit * sample_rate_hz);
            for (std::size_t k = 0; k < burst_len && start + k < len; ++k) {
                const double tau = static_cast<double>(k) / sample_rate_hz;
                out[start + k] += amp * std::exp(-spec.decay_rate * tau) *
                                  std::sin(2.0 * M_PI * spec.resonance_hz * tau);
            }
        }
    }

    if (noise_floor > 0.0) {
        for (std::size_t i = 0; i < len; ++i) out[i] += noise_floor * rng.normal();
    }
    return out;
}

Tensor add_noise_snr(const Tensor& x, double snr_db, std::uint64_t seed) {
    double ps = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) ps += x[i] * x[i];
    ps /= static_cast<double>(x.numel());
    if (ps <= 0.0) throw std::invalid_argument("add_noise_snr: zero-power input");
    const double pn = ps / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(pn);
    Rng rng(seed);
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += sigma * rng.normal();
    return out;
}

Tensor extract_windows(const Tensor& signal, std::size_t win_len, std::size_t count,
                       std::uint64_t seed) {
    if (signal.ndim() != 1) throw std::invalid_argument("extract_windows expects a 1-D signal");
    const std::size_t len = signal.numel();
    if (len < win_len) {
        throw std::invalid_argument("signal length " + std::to_string(len) +
                                    " shorter than window " + std::to_string(win_len));
    }
    Rng rng(seed);
    Tensor out({count, win_len});
    const std::size_t max_start = len - win_len + 1;
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = rng.index(max_start);
        std::memcpy(out.data() + w * win_len, signal.data() + start, win_len * sizeof(double));
    }
    return out;
}

Tensor normalize(const Tensor& window) {
    double max_abs = 0.0;
    for (std::size_t i = 0; i < window.numel(); ++i) {
        max_abs = std::max(max_abs, std::abs(window[i]));
    }
    if (max_abs == 0.0) throw std::invalid_argument("normalize: all-zero window");
    Tensor out = window;
    const double inv = 1.0 / max_abs;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inv;
    // division can leave the peak a hair off 1; pin it exactly
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (std::abs(window[i]) == max_abs) out[i] = window[i] > 0.0 ? 1.0 : -1.0;
    }
    return out;
}

Tensor Dataset::window_tensor(std::size_t i) const {
    Tensor t({1, win_len});
    const float* src = window(i);
    for (std::size_t k = 0; k < win_len; ++k) t[k] = src[k];
    return t;
}

void Dataset::append(const Tensor& w, std::uint16_t label, SplitTag split) {
    if (w.numel() != win_len) {
        throw std::invalid_argument("window length " + std::to_string(w.numel()) +
                                    " does not match dataset win_len " + std::to_string(win_len));
    }
    for (std::size_t i = 0; i < w.numel(); ++i) windows.push_back(static_cast<float>(w[i]));
    labels.push_back(label);
    splits.push_back(split);
}

Dataset Dataset::subset(SplitTag tag) const {
    Dataset out;
    out.win_len = win_len;
    out.sample_rate_hz = sample_rate_hz;
    out.class_names = class_names;
    for (std::size_t i = 0; i < size(); ++i) {
        if (splits[i] != tag) continue;
        out.windows.insert(out.windows.end(), window(i), window(i) + win_len);
        out.labels.push_back(labels[i]);
        out.splits.push_back(tag);
    }
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (std::uint16_t l : labels) {
        if (l >= counts.size()) throw std::runtime_error("label out of range");
        ++counts[l];
    }
    return counts;
}

void Dataset::validate() const {
    if (win_len == 0) throw std::invalid_argument("dataset win_len must be > 0");
    if (class_names.empty() || class_names.size() > 10) {
        throw std::invalid_argument("dataset must declare between 1 and 10 classes");
    }
    if (windows.size() != size() * win_len || splits.size() != size()) {
        throw std::invalid_argument("dataset arrays are inconsistent");
    }
    for (float v : windows) {
        if (!(v >= -1.0f && v <= 1.0f)) {
            throw std::invalid_argument("dataset window value outside [-1, 1]; normalize first");
        }
    }
    (void)class_counts();
}

void split_dataset(Dataset& dataset, double train_ratio, double val_ratio, double test_ratio,
                   std::uint64_t seed) {
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
    const std::size_t classes = dataset.num_classes();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

    Rng rng(seed);
    for (std::size_t c = 0; c < classes; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 4) {
            throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                        std::to_string(idx.size()) +
                                        " samples; need at least 4 to split");
        }
        rng.shuffle(idx);
        // largest-remainder apportionment keeps each count within +-1
        const double n = static_cast<double>(idx.size());
        std::size_t n_train = static_cast<std::size_t>(std::floor(train_ratio * n));
        std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * n));
        std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * n));
        std::size_t assigned = n_train + n_val + n_test;
        const double rem_train = train_ratio * n - std::floor(train_ratio * n);
        const double rem_val = val_ratio * n - std::floor(val_ratio * n);
        const double rem_test = test_ratio * n - std::floor(test_ratio * n);
        while (assigned < idx.size()) {
            if (rem_train >= rem_val && rem_train >= rem_test) {
                ++n_train;
            } else if (rem_val >= rem_test) {
                ++n_val;
            } else {
                ++n_test;
            }
            ++assigned;
        }
        for (std::size_t k = 0; k < idx.size(); ++k) {
            SplitTag tag = SplitTag::kTrain;
            if (k >= n_train && k < n_train + n_val) tag = SplitTag::kVal;
            if (k >= n_train + n_val) tag = SplitTag::kTest;
            dataset.splits[idx[k]] = tag;
        }
    }
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error(std::string("dataset file truncated reading ") + what);
    }
    return v;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(dataset.size()));
    write_u32(os, static_cast<std::uint32_t>(dataset.win_len));
    write_u32(os, static_cast<std::uint32_t>(dataset.num_classes()));
    const double sr = dataset.sample_rate_hz;
    os.write(reinterpret_cast<const char*>(&sr), sizeof(sr));
    for (const auto& name : dataset.class_names) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    os.write(reinterpret_cast<const char*>(dataset.labels.data()),
             static_cast<std::streamsize>(dataset.labels.size() * sizeof(std::uint16_t)));
    for (SplitTag t : dataset.splits) {
        const std::uint8_t b = static_cast<std::uint8_t>(t);
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
    os.write(reinterpret_cast<const char*>(dataset.windows.data()),
             static_cast<std::streamsize>(dataset.windows.size() * sizeof(float)));
    if (!os) throw std::runtime_error("short write to '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("dataset file error: bad magic in '" + path + "'");
    }
    const std::uint32_t version = read_u32(is, "version");
    if (version != kVersion) {
        throw std::runtime_error("dataset file error: version " + std::to_string(version) +
                                 ", expected " + std::to_string(kVersion));
    }
    Dataset d;
    const std::uint32_t n = read_u32(is, "count");
    d.win_len = read_u32(is, "win_len");
    const std::uint32_t classes = read_u32(is, "num_classes");
    if (!is.read(reinterpret_cast<char*>(&d.sample_rate_hz), sizeof(double))) {
        throw std::runtime_error("dataset file truncated reading sample_rate");
    }
    for (std::uint32_t c = 0; c < classes; ++c) {
        const std::uint32_t len = read_u32(is, "class name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw std::runtime_error("dataset file truncated");
        d.class_names.push_back(name);
    }
    d.labels.resize(n);
    if (!is.read(reinterpret_cast<char*>(d.labels.data()),
                 static_cast<std::streamsize>(n * sizeof(std::uint16_t)))) {
        throw std::runtime_error("dataset file truncated reading labels");
    }
    d.splits.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint8_t b = 0;
        if (!is.read(reinterpret_cast<char*>(&b), 1)) {
            throw std::runtime_error("dataset file truncated reading splits");
        }
        if (b > 2) throw std::runtime_error("dataset file error: bad split code");
        d.splits[i] = static_cast<SplitTag>(b);
    }
    d.windows.resize(static_cast<std::size_t>(n) * d.win_len);
    if (!is.read(reinterpret_cast<char*>(d.windows.data()),
                 static_cast<std::streamsize>(d.windows.size() * sizeof(float)))) {
        throw std::runtime_error("dataset file truncated reading windows");
    }
    d.validate();
    return d;
}

Dataset with_noise(const Dataset& clean, double snr_db, std::uint64_t seed) {
    if (std::isnan(snr_db)) return clean;
    Dataset out = clean;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        Tensor w({clean.win_len});
        const float* src = clean.window(i);
        for (std::size_t k = 0; k < clean.win_len; ++k) w[k] = src[k];
        Tensor noisy = normalize(add_noise_snr(w, snr_db, Rng::derive_seed(seed, i)));
        float* dst = out.windows.data() + i * clean.win_len;
        for (std::size_t k = 0; k < clean.win_len; ++k) dst[k] = static_cast<float>(noisy[k]);
    }
    return out;
}

FaultSpec class_fault_spec(const SyntheticConfig& cfg, std::size_t label) {
    if (label >= cfg.num_classes) throw std::invalid_argument("class label out of range");
    FaultSpec spec;
    spec.resonance_hz = cfg.resonance_hz;
    spec.decay_rate = cfg.decay_rate;
    if (label == 0) return spec;  // healthy
    static const double kSeverities[3] = {0.5, 1.0, 2.0};
    const std::size_t fault_idx = label - 1;
    const std::size_t mode_idx = fault_idx / 3;
    spec.severity = kSeverities[fault_idx % 3];
    switch (mode_idx) {
        case 0:
            spec.mode = FaultMode::kBall;
            spec.slip_fraction = 0.01;
            // slow decay keeps the envelope fundamental above its harmonics
            // at the low ball-spin rate
            spec.decay_rate = cfg.decay_rate / 2.0;
            break;
        case 1: spec.mode = FaultMode::kOuter; break;
        default: spec.mode = FaultMode::kInner; break;
    }
    return spec;
}

std::vector<std::string> default_class_names(std::size_t num_classes) {
    static const char* kNames[10] = {"healthy",       "ball_minor",  "ball_moderate",
                                     "ball_severe",   "outer_minor", "outer_moderate",
                                     "outer_severe",  "inner_minor", "inner_moderate",
                                     "inner_severe"};
    if (num_classes < 1 || num_classes > 10) {
        throw std::invalid_argument("synthetic dataset supports 1..10 classes");
    }
    return std::vector<std::string>(kNames, kNames + num_classes);
}

Dataset make_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed) {
    Dataset out;
    out.win_len = cfg.win_len;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.class_names = default_class_names(cfg.num_classes);

    for (std::size_t label = 0; label < cfg.num_classes; ++label) {
        const FaultSpec spec = class_fault_spec(cfg, label);
        const std::uint64_t class_seed = Rng::derive_seed(seed, 1000 + label);
        Tensor long_signal =
            synthesize_fault_signal(spec, cfg.geometry, cfg.shaft_hz, cfg.sample_rate_hz,
                                    cfg.duration_s, cfg.noise_floor, class_seed);
        Tensor windows = extract_windows(long_signal, cfg.win_len, cfg.windows_per_class,
                                         Rng::derive_seed(seed, 2000 + label));
        for (std::size_t w = 0; w < cfg.windows_per_class; ++w) {
            Tensor win({cfg.win_len},
                       std::vector<double>(windows.data() + w * cfg.win_len,
                                           windows.data() + (w + 1) * cfg.win_len));
            out.append(normalize(win), static_cast<std::uint16_t>(label));
        }
    }
    split_dataset(out, 0.5, 0.25, 0.25, Rng::derive_seed(seed, 3));
    out.validate();
    return out;
}

}  // namespace qdiag
