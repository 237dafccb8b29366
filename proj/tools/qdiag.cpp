// qdiag: synthesize bearing vibration datasets, train quadratic-neuron CNNs,
// evaluate them under noise, and extract qttention maps and envelope spectra.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdiag/eval.hpp"
#include "qdiag/network.hpp"
#include "qdiag/qttention.hpp"
#include "qdiag/signals.hpp"
#include "qdiag/spectrum.hpp"
#include "qdiag/training.hpp"

namespace {

using namespace qdiag;

// Effective-config snapshot written next to a command's primary output, so
// every run is reproducible from its artifacts alone.
void write_snapshot(const CLI::App& cmd, const std::string& primary_output) {
    if (primary_output.empty()) return;
    const std::string path = primary_output + ".cfg";
    std::ofstream os(path, std::ios::trunc);
    os << "# effective configuration for `qdiag " << cmd.get_name() << "`\n";
    os << cmd.config_to_str(true, false);
}

std::string derive_profile_name(const ArchitectureSpec& spec) {
    if (!spec.dense.empty() && spec.dense.front().variant == NeuronVariant::kQuadratic) {
        return "qcnn-aq";
    }
    switch (spec.blocks.front().variant) {
        case NeuronVariant::kConventional: return "wdcnn";
        case NeuronVariant::kNoG: return "qcnn-ng";
        case NeuronVariant::kNoPower: return "qcnn-np";
        case NeuronVariant::kQuadratic: return "qcnn";
    }
    return "qcnn";
}

std::uint64_t run_seed(std::uint64_t base, std::uint64_t run) {
    return Rng::derive_seed(base, 0xABCD0000 + run);
}

struct TrainedRun {
    Model model;
    TrainHistory history;
    double test_acc = 0.0;
};

// One training run end to end: noise injection, init, train, test accuracy.
TrainedRun run_training(const Dataset& clean, VariantProfile profile, double gamma_r,
                        double alpha, std::size_t epochs, std::size_t batch_size,
                        std::uint64_t seed, double snr_db, int threads) {
    const Dataset noisy = with_noise(clean, snr_db, Rng::derive_seed(seed, 0x5E5E));
    Dataset train_set = noisy.subset(SplitTag::kTrain);
    Dataset val_set = noisy.subset(SplitTag::kVal);
    Dataset test_set = noisy.subset(SplitTag::kTest);

    TrainedRun run{Model(build_backbone(profile, noisy.win_len, noisy.num_classes())),
                   TrainHistory{}, 0.0};
    relinear_init(run.model, seed);
    TrainConfig cfg;
    cfg.gamma_r = gamma_r;
    cfg.alpha = alpha;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.threads = threads;
    run.history = train(run.model, train_set, val_set, cfg);
    run.test_acc = evaluate(run.model, test_set).second;
    return run;
}

std::vector<double> parse_number_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

int cmd_synth(CLI::App& cmd, const std::string& out, std::size_t classes, double fs, double rpm,
              double duration, std::uint64_t seed, std::size_t windows_per_class,
              std::size_t win_len, double noise_floor) {
    SyntheticConfig cfg;
    cfg.num_classes = classes;
    cfg.sample_rate_hz = fs;
    cfg.shaft_hz = rpm / 60.0;
    cfg.duration_s = duration;
    cfg.windows_per_class = windows_per_class;
    cfg.win_len = win_len;
    cfg.noise_floor = noise_floor;
    Dataset data = make_synthetic_dataset(cfg, seed);
    save_dataset(data, out);
    write_snapshot(cmd, out);
    std::cout << "wrote " << data.size() << " windows (" << classes << " classes, win_len "
              << win_len << ") to " << out << "\n";
    return 0;
}

int cmd_train(CLI::App& cmd, const std::string& data_path, const std::string& profile_name,
              double gamma_r, double alpha, std::size_t epochs, std::size_t batch_size,
              std::uint64_t seed, double snr_db, const std::string& out_ckpt,
              std::string history_out, int threads) {
    const Dataset clean = load_dataset(data_path);
    const VariantProfile profile = profile_from_name(profile_name);
    TrainedRun run = run_training(clean, profile, gamma_r, alpha, epochs, batch_size, seed,
                                  snr_db, threads);
    save_checkpoint(run.model, out_ckpt);
    if (history_out.empty()) history_out = out_ckpt + ".history.csv";
    run.history.write_csv(history_out);
    write_snapshot(cmd, out_ckpt);
    std::printf("%s: val_acc %.4f, test_acc %.4f (%.1fs)\n", profile_name.c_str(),
                run.history.epochs.back().val_acc, run.test_acc, run.history.wall_seconds);
    return 0;
}

int cmd_eval(CLI::App& cmd, const std::string& ckpt_path, const std::string& data_path,
             double snr_db, std::uint64_t seed, const std::string& out_prefix, int threads) {
    Model model = load_checkpoint(ckpt_path);
    model.set_threads(threads);
    Dataset data = load_dataset(data_path);
    if (!std::isnan(snr_db)) data = with_noise(data, snr_db, Rng::derive_seed(seed, 0x5E5E));
    Dataset test_set = data.subset(SplitTag::kTest);
    if (test_set.size() == 0) throw std::runtime_error("dataset has no test split");

    std::vector<int> preds = predict(model, test_set);
    std::vector<int> labels(test_set.labels.begin(), test_set.labels.end());
    const double acc = accuracy(preds, labels);
    ConfusionMatrix cm = confusion(preds, labels, test_set.num_classes());

    const std::string model_name = derive_profile_name(model.spec());
    if (!out_prefix.empty()) {
        std::ofstream os(out_prefix + ".accuracy.csv", std::ios::trunc);
        os << "model,snr_db,seed,accuracy\n";
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%.9g,%llu,%.9g\n", model_name.c_str(),
                      std::isnan(snr_db) ? std::nan("") : snr_db,
                      static_cast<unsigned long long>(seed), acc);
        os << line;
        cm.write_csv(out_prefix + ".confusion.csv");
        write_snapshot(cmd, out_prefix + ".accuracy.csv");
    }
    std::printf("%s: test accuracy %.4f over %zu samples\n", model_name.c_str(), acc,
                test_set.size());
    const auto healthy =
        std::find(test_set.class_names.begin(), test_set.class_names.end(), "healthy");
    if (healthy != test_set.class_names.end()) {
        const std::size_t idx =
            static_cast<std::size_t>(healthy - test_set.class_names.begin());
        std::printf("faults judged healthy: %ld\n", cm.faults_judged_healthy(idx));
    }
    return 0;
}

int cmd_sweep(CLI::App& cmd, const std::string& data_path, const std::string& profiles_csv,
              const std::string& snrs_csv, std::size_t runs, double gamma_r, double alpha,
              std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
              const std::string& out, int threads) {
    const Dataset clean = load_dataset(data_path);
    std::vector<std::string> profiles;
    {
        std::stringstream ss(profiles_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) profiles.push_back(item);
        }
    }
    const std::vector<double> snrs = parse_number_list(snrs_csv);
    if (profiles.empty() || snrs.empty()) {
        throw std::runtime_error("sweep needs at least one profile and one SNR");
    }

    std::ofstream os(out, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + out + "' for writing");
    os << "model,snr_db,seed,accuracy\n";
    for (const std::string& profile_name : profiles) {
        const VariantProfile profile = profile_from_name(profile_name);
        for (double snr : snrs) {
            double mean = 0.0, m2 = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                const std::uint64_t rs = run_seed(seed, r);
                TrainedRun run = run_training(clean, profile, gamma_r, alpha, epochs,
                                              batch_size, rs, snr, threads);
                char line[128];
                std::snprintf(line, sizeof(line), "%s,%.9g,%llu,%.9g\n", profile_name.c_str(),
                              snr, static_cast<unsigned long long>(rs), run.test_acc);
                os << line << std::flush;
                const double delta = run.test_acc - mean;
                mean += delta / static_cast<double>(r + 1);
                m2 += delta * (run.test_acc - mean);
            }
            const double std_dev =
                runs > 1 ? std::sqrt(m2 / static_cast<double>(runs - 1)) : 0.0;
            std::printf("%s @ %+.0f dB: %.4f +- %.4f (%zu runs)\n", profile_name.c_str(), snr,
                        mean, std_dev, runs);
        }
    }
    write_snapshot(cmd, out);
    return 0;
}

int cmd_qttention(CLI::App& cmd, const std::string& ckpt_path, const std::string& data_path,
                  std::size_t sample_idx, std::size_t layer, const std::string& grad_mode_name_,
                  const std::string& aggregation_name_, bool upsample, const std::string& out,
                  int threads) {
    Model model = load_checkpoint(ckpt_path);
    model.set_threads(threads);
    const Dataset data = load_dataset(data_path);
    if (sample_idx >= data.size()) {
        throw std::runtime_error("sample index " + std::to_string(sample_idx) +
                                 " out of range (dataset has " + std::to_string(data.size()) +
                                 " windows)");
    }
    const QttGradMode mode = grad_mode_from_name(grad_mode_name_);
    const ChannelAggregation agg = aggregation_from_name(aggregation_name_);
    Tensor sample = data.window_tensor(sample_idx);

    QttentionMap map;
    const QuadraticConv1d& conv = model.conv(layer);
    if (conv.params().variant == NeuronVariant::kConventional) {
        // saliency analogue for conventional checkpoints
        Tensor input = model.block_input(sample, layer);
        map = conventional_saliency(input, conv.params(), conv.stride(), conv.pad(), agg, mode);
        map.layer_index = static_cast<int>(layer);
    } else {
        map = layer_qttention(model, sample, layer, agg, mode);
    }
    if (upsample) map = upsample_map(map, data.win_len);
    export_map(map, out);
    write_snapshot(cmd, out);
    std::printf("%s map for sample %zu, layer %zu: %zu points -> %s\n",
                conv.params().variant == NeuronVariant::kConventional ? "saliency" : "qttention",
                sample_idx, layer, map.size(), out.c_str());
    return 0;
}

int cmd_envelope(CLI::App& cmd, const std::string& input, std::size_t sample_idx, double fs_flag,
                 double rpm, const std::string& targets_csv, int tol_bins,
                 const std::string& out) {
    std::vector<double> signal;
    double fs = fs_flag;
    if (input.ends_with(".csv")) {
        QttentionMap map = import_map(input);
        signal = map.values;
        if (!(fs > 0.0)) {
            throw std::runtime_error("--fs is required for qttention CSV inputs");
        }
    } else {
        Dataset data = load_dataset(input);
        if (sample_idx >= data.size()) {
            throw std::runtime_error("sample index out of range");
        }
        const float* w = data.window(sample_idx);
        signal.assign(w, w + data.win_len);
        if (!(fs > 0.0)) fs = data.sample_rate_hz;
    }

    Spectrum spec = envelope_spectrum(signal, fs);
    write_spectrum_csv(spec, out);
    write_snapshot(cmd, out);

    if (!targets_csv.empty()) {
        const double shaft_hz = rpm / 60.0;
        BearingGeometry geometry;
        const CharacteristicFrequencies cf = characteristic_frequencies(geometry, shaft_hz);
        std::vector<std::pair<std::string, double>> targets;
        std::stringstream ss(targets_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "bpfo") {
                targets.emplace_back(item, cf.bpfo);
            } else if (item == "bpfi") {
                targets.emplace_back(item, cf.bpfi);
            } else if (item == "bsf") {
                targets.emplace_back(item, cf.bsf);
            } else if (item == "ftf") {
                targets.emplace_back(item, cf.ftf);
            } else if (item == "shaft") {
                targets.emplace_back(item, shaft_hz);
            } else if (!item.empty()) {
                targets.emplace_back(item, std::stod(item));
            }
        }
        std::vector<double> freqs;
        freqs.reserve(targets.size());
        for (const auto& t : targets) freqs.push_back(t.second);
        const auto matches = match_peaks(spec, freqs, tol_bins);
        for (std::size_t i = 0; i < matches.size(); ++i) {
            std::printf("%-8s %8.2f Hz: %s at %.2f Hz, magnitude %.4g, prominence %.2f\n",
                        targets[i].first.c_str(), targets[i].second,
                        matches[i].found ? "found" : "not found", matches[i].freq_hz,
                        matches[i].magnitude, matches[i].prominence);
        }
    }
    std::printf("spectrum: %zu bins at %.3f Hz resolution -> %s\n", spec.size(),
                spec.resolution_hz, out.c_str());
    return 0;
}

int cmd_ablate(CLI::App& cmd, const std::string& data_path, double gamma_r, double alpha,
               std::size_t epochs, std::size_t batch_size, std::uint64_t seed, double snr_db,
               const std::string& out, int threads) {
    const Dataset clean = load_dataset(data_path);
    const char* profiles[] = {"wdcnn", "qcnn-aq", "qcnn-np", "qcnn-ng", "qcnn"};
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + out + "' for writing");
    os << "model,snr_db,seed,accuracy\n";
    for (const char* name : profiles) {
        TrainedRun run = run_training(clean, profile_from_name(name), gamma_r, alpha, epochs,
                                      batch_size, seed, snr_db, threads);
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%.9g,%llu,%.9g\n", name,
                      std::isnan(snr_db) ? std::nan("") : snr_db,
                      static_cast<unsigned long long>(seed), run.test_acc);
        os << line << std::flush;
        std::printf("%-8s test accuracy %.4f\n", name, run.test_acc);
    }
    write_snapshot(cmd, out);
    return 0;
}

int cmd_params(const std::string& profile_name, std::size_t input_len, std::size_t classes) {
    const VariantProfile profile = profile_from_name(profile_name);
    ArchitectureSpec spec = build_backbone(profile, input_len, classes);
    Model model(spec);
    ParamCount pc = count_params(model);
    std::printf("profile %s (input %zu, %zu classes)\n", profile_name.c_str(), input_len,
                classes);
    std::printf("total parameters: %zu\nconv weights:     %zu\n", pc.total, pc.conv_weights);
    std::printf("flops (MACs/sample): %zu\n", flops_estimate(spec));

    ArchitectureSpec conv_spec = build_backbone(VariantProfile::kWdcnn, input_len, classes);
    Model conv_model(conv_spec);
    ParamCount conv_pc = count_params(conv_model);
    std::printf("conv-weight ratio vs wdcnn: %g\n",
                static_cast<double>(pc.conv_weights) / static_cast<double>(conv_pc.conv_weights));

    std::printf("\nper-layer attention-module comparison (r = 2):\n");
    std::printf("%-8s %6s %6s %6s %14s %14s\n", "layer", "C", "H", "W", "P(att)", "P(qtt)");
    std::size_t c_in = 1;
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const auto& b = spec.blocks[i];
        AttentionParamEstimate est = attention_param_estimate(b.out_channels, c_in, b.kernel, 2.0);
        std::printf("block%-3zu %6zu %6zu %6zu %14.0f %14.0f\n", i + 1, b.out_channels, c_in,
                    b.kernel, est.channel_attention, est.qttention);
        c_in = b.out_channels;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadratic-neuron 1-D CNNs for bearing fault diagnosis"};
    app.require_subcommand(1);
    app.fallthrough(false);

    int threads = hardware_threads();
    app.add_option("--threads", threads, "worker thread cap for all commands")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic ten-class dataset");
    std::string synth_out = "dataset.qbrg";
    std::size_t synth_classes = 10, synth_wpc = 1000, synth_winlen = 2048;
    double synth_fs = 12000.0, synth_rpm = 1800.0, synth_duration = 47.0, synth_floor = 0.05;
    std::uint64_t synth_seed = 0;
    synth->fallthrough();
    synth->set_config("--config", "", "key=value config file");
    synth->add_option("--out", synth_out, "output dataset path")->capture_default_str();
    synth->add_option("--classes", synth_classes, "number of classes (1..10)")
        ->capture_default_str();
    synth->add_option("--fs", synth_fs, "sample rate in Hz")->capture_default_str();
    synth->add_option("--rpm", synth_rpm, "shaft speed in r/min")->capture_default_str();
    synth->add_option("--duration", synth_duration, "seconds of signal per class")
        ->capture_default_str();
    synth->add_option("--seed", synth_seed, "generator seed")
        ->envname("QD_SEED")
        ->capture_default_str();
    synth->add_option("--windows-per-class", synth_wpc, "windows extracted per class")
        ->capture_default_str();
    synth->add_option("--win-len", synth_winlen, "window length in samples")
        ->capture_default_str();
    synth->add_option("--noise-floor", synth_floor, "generator noise floor amplitude")
        ->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string train_data, train_profile = "qcnn", train_ckpt = "model.qckp", train_history;
    double train_gamma = 0.1, train_alpha = 1e-2, train_snr = std::nan("");
    std::size_t train_epochs = 50, train_batch = 64;
    std::uint64_t train_seed = 0;
    train_cmd->fallthrough();
    train_cmd->set_config("--config", "", "key=value config file");
    train_cmd->add_option("--data", train_data, "dataset path")->required();
    train_cmd->add_option("--profile", train_profile, "qcnn|qcnn-ng|qcnn-np|qcnn-aq|wdcnn")
        ->capture_default_str();
    train_cmd->add_option("--gamma-r", train_gamma, "learning rate for the r group")
        ->capture_default_str();
    train_cmd->add_option("--alpha", train_alpha, "gamma_gb = alpha * gamma_r")
        ->capture_default_str();
    train_cmd->add_option("--epochs", train_epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", train_batch, "minibatch size")->capture_default_str();
    train_cmd->add_option("--seed", train_seed, "training seed")
        ->envname("QD_SEED")
        ->capture_default_str();
    train_cmd->add_option("--snr", train_snr, "inject noise at this SNR (dB) before training");
    train_cmd->add_option("--out-ckpt", train_ckpt, "checkpoint output path")
        ->capture_default_str();
    train_cmd->add_option("--history-out", train_history,
                          "history CSV path (default <ckpt>.history.csv)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, eval_prefix;
    double eval_snr = std::nan("");
    std::uint64_t eval_seed = 0;
    eval_cmd->fallthrough();
    eval_cmd->set_config("--config", "", "key=value config file");
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset path")->required();
    eval_cmd->add_option("--snr", eval_snr, "inject noise at this SNR (dB) before evaluating");
    eval_cmd->add_option("--seed", eval_seed, "noise seed")
        ->envname("QD_SEED")
        ->capture_default_str();
    eval_cmd->add_option("--out-prefix", eval_prefix,
                         "write <prefix>.accuracy.csv and <prefix>.confusion.csv");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "noise-robustness sweep over profiles and SNRs");
    std::string sweep_data, sweep_profiles = "qcnn,wdcnn", sweep_snrs = "-6,-4,-2,0,2,4,6";
    std::string sweep_out = "sweep.csv";
    std::size_t sweep_runs = 10, sweep_epochs = 20, sweep_batch = 64;
    double sweep_gamma = 0.1, sweep_alpha = 1e-3;
    std::uint64_t sweep_seed = 0;
    sweep->fallthrough();
    sweep->set_config("--config", "", "key=value config file");
    sweep->add_option("--data", sweep_data, "dataset path")->required();
    sweep->add_option("--profiles", sweep_profiles, "comma-separated profile list")
        ->capture_default_str();
    sweep->add_option("--snrs", sweep_snrs, "comma-separated SNR list in dB")
        ->capture_default_str();
    sweep->add_option("--runs", sweep_runs, "seeded runs per cell")->capture_default_str();
    sweep->add_option("--gamma-r", sweep_gamma, "learning rate for the r group")
        ->capture_default_str();
    sweep->add_option("--alpha", sweep_alpha, "gamma_gb = alpha * gamma_r")
        ->capture_default_str();
    sweep->add_option("--epochs", sweep_epochs, "training epochs per run")
        ->capture_default_str();
    sweep->add_option("--batch-size", sweep_batch, "minibatch size")->capture_default_str();
    sweep->add_option("--seed", sweep_seed, "base seed")
        ->envname("QD_SEED")
        ->capture_default_str();
    sweep->add_option("--out", sweep_out, "results CSV path")->capture_default_str();

    // qttention
    auto* qtt = app.add_subcommand("qttention", "extract a qttention (or saliency) map");
    std::string qtt_ckpt, qtt_data, qtt_out = "map.csv";
    std::string qtt_grad = "temporal-diff", qtt_agg = "mean-abs";
    std::size_t qtt_sample = 0, qtt_layer = 0;
    bool qtt_upsample = false;
    qtt->fallthrough();
    qtt->set_config("--config", "", "key=value config file");
    qtt->add_option("--ckpt", qtt_ckpt, "checkpoint path")->required();
    qtt->add_option("--data", qtt_data, "dataset path")->required();
    qtt->add_option("--sample-idx", qtt_sample, "window index")->capture_default_str();
    qtt->add_option("--layer", qtt_layer, "conv block index (0-based)")->capture_default_str();
    qtt->add_option("--grad-mode", qtt_grad, "temporal-diff|exact-sum-derivative")
        ->capture_default_str();
    qtt->add_option("--aggregation", qtt_agg, "mean-abs|max-abs")->capture_default_str();
    qtt->add_flag("--upsample-to-input", qtt_upsample,
                  "linearly interpolate the map to the input length");
    qtt->add_option("--out", qtt_out, "map CSV path")->capture_default_str();

    // envelope
    auto* env = app.add_subcommand("envelope",
                                   "envelope spectrum of a dataset window or qttention CSV");
    std::string env_input, env_targets, env_out = "spectrum.csv";
    std::size_t env_sample = 0;
    double env_fs = 0.0, env_rpm = 1800.0;
    int env_tol = 2;
    env->fallthrough();
    env->set_config("--config", "", "key=value config file");
    env->add_option("--input", env_input, "dataset file or qttention map CSV")->required();
    env->add_option("--sample-idx", env_sample, "window index for dataset inputs")
        ->capture_default_str();
    env->add_option("--fs", env_fs, "sample rate in Hz (defaults to the dataset's)");
    env->add_option("--rpm", env_rpm, "shaft speed for named targets")->capture_default_str();
    env->add_option("--targets", env_targets,
                    "comma-separated targets: bpfo,bpfi,bsf,ftf,shaft or numbers in Hz");
    env->add_option("--tol-bins", env_tol, "peak match tolerance in bins")->capture_default_str();
    env->add_option("--out", env_out, "spectrum CSV path")->capture_default_str();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "compare all neuron variants on one dataset");
    std::string ablate_data, ablate_out = "ablation.csv";
    double ablate_gamma = 0.1, ablate_alpha = 1e-3, ablate_snr = std::nan("");
    std::size_t ablate_epochs = 20, ablate_batch = 64;
    std::uint64_t ablate_seed = 0;
    ablate->fallthrough();
    ablate->set_config("--config", "", "key=value config file");
    ablate->add_option("--data", ablate_data, "dataset path")->required();
    ablate->add_option("--gamma-r", ablate_gamma, "learning rate for the r group")
        ->capture_default_str();
    ablate->add_option("--alpha", ablate_alpha, "gamma_gb = alpha * gamma_r")
        ->capture_default_str();
    ablate->add_option("--epochs", ablate_epochs, "training epochs per profile")
        ->capture_default_str();
    ablate->add_option("--batch-size", ablate_batch, "minibatch size")->capture_default_str();
    ablate->add_option("--seed", ablate_seed, "training seed")
        ->envname("QD_SEED")
        ->capture_default_str();
    ablate->add_option("--snr", ablate_snr, "inject noise at this SNR (dB)");
    ablate->add_option("--out", ablate_out, "results CSV path")->capture_default_str();

    // params
    auto* params = app.add_subcommand("params", "parameter and FLOP accounting for a profile");
    std::string params_profile = "qcnn";
    std::size_t params_input = 2048, params_classes = 10;
    params->fallthrough();
    params->add_option("--profile", params_profile, "qcnn|qcnn-ng|qcnn-np|qcnn-aq|wdcnn")
        ->capture_default_str();
    params->add_option("--input-len", params_input, "model input length")->capture_default_str();
    params->add_option("--classes", params_classes, "number of classes")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(*synth, synth_out, synth_classes, synth_fs, synth_rpm,
                             synth_duration, synth_seed, synth_wpc, synth_winlen, synth_floor);
        }
        if (train_cmd->parsed()) {
            return cmd_train(*train_cmd, train_data, train_profile, train_gamma, train_alpha,
                             train_epochs, train_batch, train_seed, train_snr, train_ckpt,
                             train_history, threads);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(*eval_cmd, eval_ckpt, eval_data, eval_snr, eval_seed, eval_prefix,
                            threads);
        }
        if (sweep->parsed()) {
            return cmd_sweep(*sweep, sweep_data, sweep_profiles, sweep_snrs, sweep_runs,
                             sweep_gamma, sweep_alpha, sweep_epochs, sweep_batch, sweep_seed,
                             sweep_out, threads);
        }
        if (qtt->parsed()) {
            return cmd_qttention(*qtt, qtt_ckpt, qtt_data, qtt_sample, qtt_layer, qtt_grad,
                                 qtt_agg, qtt_upsample, qtt_out, threads);
        }
        if (env->parsed()) {
            return cmd_envelope(*env, env_input, env_sample, env_fs, env_rpm, env_targets,
                                env_tol, env_out);
        }
        if (ablate->parsed()) {
            return cmd_ablate(*ablate, ablate_data, ablate_gamma, ablate_alpha, ablate_epochs,
                              ablate_batch, ablate_seed, ablate_snr, ablate_out, threads);
        }
        if (params->parsed()) {
            return cmd_params(params_profile, params_input, params_classes);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
