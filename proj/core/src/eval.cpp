#include "qdiag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace qdiag {

double accuracy(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size()) {
        throw std::invalid_argument("accuracy: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(labels.size()) +
                                    " labels");
    }
    if (preds.empty()) throw std::invalid_argument("accuracy: empty inputs");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

long ConfusionMatrix::trace() const {
    long t = 0;
    for (std::size_t c = 0; c < num_classes; ++c) t += at(c, c);
    return t;
}

long ConfusionMatrix::faults_judged_healthy(std::size_t healthy_class) const {
    long sum = 0;
    for (std::size_t truth = 0; truth < num_classes; ++truth) {
        if (truth == healthy_class) continue;
        sum += at(truth, healthy_class);
    }
    return sum;
}

std::vector<double> ConfusionMatrix::per_class_recall() const {
    std::vector<double> out(num_classes, 0.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        long row = 0;
        for (std::size_t p = 0; p < num_classes; ++p) row += at(c, p);
        out[c] = row > 0 ? static_cast<double>(at(c, c)) / static_cast<double>(row) : 0.0;
    }
    return out;
}

void ConfusionMatrix::write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "true,pred,count\n";
    for (std::size_t t = 0; t < num_classes; ++t) {
        for (std::size_t p = 0; p < num_classes; ++p) {
            os << t << ',' << p << ',' << at(t, p) << '\n';
        }
    }
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels,
                          std::size_t num_classes) {
    if (preds.size() != labels.size()) {
        throw std::invalid_argument("confusion: prediction/label length mismatch");
    }
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(num_classes * num_classes, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw std::invalid_argument("confusion: class index out of range at sample " +
                                        std::to_string(i));
        }
        ++cm.counts[static_cast<std::size_t>(t) * num_classes + static_cast<std::size_t>(p)];
    }
    return cm;
}

ParamCount count_params(const Model& model) {
    ParamCount out;
    Model& m = const_cast<Model&>(model);
    for (Parameter* p : m.parameters()) {
        out.total += p->value.numel();
        out.per_layer.emplace_back(p->name(), p->value.numel());
        const std::string& name = p->name();
        if (name.find(".conv.w_") != std::string::npos) out.conv_weights += p->value.numel();
    }
    return out;
}

AttentionParamEstimate attention_param_estimate(std::size_t c, std::size_t h, std::size_t w,
                                                double r) {
    if (c < 1 || h < 1 || w < 1 || !(r > 0.0)) {
        throw std::invalid_argument("attention_param_estimate needs C,H,W >= 1 and r > 0");
    }
    const double chw = static_cast<double>(c) * static_cast<double>(h) * static_cast<double>(w);
    const double c5 = std::pow(static_cast<double>(c), 5.0);
    AttentionParamEstimate est;
    est.channel_attention = chw + 2.0 * c5 / (r * r);
    est.qttention = 3.0 * chw;
    return est;
}

std::size_t flops_estimate(const ArchitectureSpec& spec) {
    std::size_t macs = 0;
    std::size_t len = spec.input_len;
    std::size_t c_in = 1;
    for (const auto& b : spec.blocks) {
        const std::size_t out_len = conv_output_len(len, b.kernel, b.stride, b.pad);
        const std::size_t base = out_len * b.out_channels * c_in * b.kernel;
        const bool quad = b.variant != NeuronVariant::kConventional;
        macs += base * (quad ? 3 : 1);
        if (quad) macs += 2 * out_len * b.out_channels;
        len = b.pool ? (out_len + 1) / 2 : out_len;
        c_in = b.out_channels;
    }
    std::size_t width = c_in * len;
    for (const auto& d : spec.dense) {
        const bool quad = d.variant != NeuronVariant::kConventional;
        macs += width * d.units * (quad ? 3 : 1);
        if (quad) macs += 2 * d.units;
        width = d.units;
    }
    return macs;
}

int LinearClassifier::predict(std::span<const double> features) const {
    if (features.size() != dim) {
        throw std::invalid_argument("classifier expects " + std::to_string(dim) +
                                    " features, got " + std::to_string(features.size()));
    }
    int best = 0;
    double best_score = -1e300;
    for (std::size_t c = 0; c < num_classes; ++c) {
        double s = bias[c];
        const double* w = weights.data() + c * dim;
        for (std::size_t i = 0; i < dim; ++i) {
            s += w[i] * (features[i] - feat_mean[i]) * feat_std[i];
        }
        if (s > best_score) {
            best_score = s;
            best = static_cast<int>(c);
        }
    }
    return best;
}

double LinearClassifier::accuracy_on(const Tensor& features, std::span<const int> labels) const {
    const std::size_t n = features.extent(0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (predict(features.row(i)) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

LinearClassifier train_linear_classifier(const Tensor& features, const std::vector<int>& labels,
                                         std::size_t num_classes, std::size_t epochs, double lr,
                                         std::uint64_t seed) {
    if (features.ndim() != 2 || features.extent(0) != labels.size()) {
        throw std::invalid_argument("train_linear_classifier: features " +
                                    shape_to_string(features.shape()) + " vs " +
                                    std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = features.extent(0);
    const std::size_t dim = features.extent(1);

    LinearClassifier clf;
    clf.num_classes = num_classes;
    clf.dim = dim;
    clf.weights.assign(num_classes * dim, 0.0);
    clf.bias.assign(num_classes, 0.0);
    clf.feat_mean.assign(dim, 0.0);
    clf.feat_std.assign(dim, 1.0);

    // standardize on the training features; feat_std stores 1/sigma
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = features.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) clf.feat_mean[d] += row[d];
    }
    for (std::size_t d = 0; d < dim; ++d) clf.feat_mean[d] /= static_cast<double>(n);
    std::vector<double> var(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = features.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = row[d] - clf.feat_mean[d];
            var[d] += diff * diff;
        }
    }
    for (std::size_t d = 0; d < dim; ++d) {
        const double sigma = std::sqrt(var[d] / static_cast<double>(n));
        clf.feat_std[d] = sigma > 1e-12 ? 1.0 / sigma : 0.0;  // constant features drop out
    }

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> z(dim);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t idx : order) {
            const double* row = features.data() + idx * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                z[d] = (row[d] - clf.feat_mean[d]) * clf.feat_std[d];
            }
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double y = labels[idx] == static_cast<int>(c) ? 1.0 : -1.0;
                double* w = clf.weights.data() + c * dim;
                double s = clf.bias[c];
                for (std::size_t d = 0; d < dim; ++d) s += w[d] * z[d];
                if (1.0 - y * s > 0.0) {  // hinge subgradient
                    for (std::size_t d = 0; d < dim; ++d) w[d] += lr * y * z[d];
                    clf.bias[c] += lr * y;
                }
            }
        }
    }
    return clf;
}

std::string feature_source_name(FeatureSource s) {
    switch (s) {
        case FeatureSource::kRaw: return "raw";
        case FeatureSource::kFirstLayerOutput: return "first-layer-output";
        case FeatureSource::kFirstLayerQttention: return "first-layer-qttention";
    }
    return "?";
}

Tensor qttention_feature_pipeline(Model& model, const Dataset& dataset, FeatureSource source) {
    const std::size_t n = dataset.size();
    if (n == 0) throw std::invalid_argument("feature pipeline: empty dataset");
    if (source == FeatureSource::kRaw) {
        Tensor out({n, dataset.win_len});
        for (std::size_t i = 0; i < n; ++i) {
            const float* src = dataset.window(i);
            double* dst = out.data() + i * dataset.win_len;
            for (std::size_t k = 0; k < dataset.win_len; ++k) dst[k] = src[k];
        }
        return out;
    }
    if (dataset.win_len != model.spec().input_len) {
        throw std::invalid_argument("feature pipeline: dataset window length " +
                                    std::to_string(dataset.win_len) + " does not match model");
    }
    if (source == FeatureSource::kFirstLayerOutput) {
        // channel-averaged first conv block output (post conv, pre batchnorm)
        const QuadraticConv1d& conv0 = model.conv(0);
        const std::size_t out_len = conv0.output_len(dataset.win_len);
        Tensor out({n, out_len});
        Tensor batch({1, 1, dataset.win_len});
        for (std::size_t i = 0; i < n; ++i) {
            const float* src = dataset.window(i);
            for (std::size_t k = 0; k < dataset.win_len; ++k) batch[k] = src[k];
            Tensor fmap = const_cast<QuadraticConv1d&>(conv0).forward(batch, Mode::kEval);
            const std::size_t chans = fmap.extent(1);
            double* dst = out.data() + i * out_len;
            for (std::size_t t = 0; t < out_len; ++t) {
                double sum = 0.0;
                for (std::size_t c = 0; c < chans; ++c) sum += fmap.at(0, c, t);
                dst[t] = sum / static_cast<double>(chans);
            }
        }
        return out;
    }
    // first-layer qttention map per sample
    Tensor out({n, dataset.win_len});
    for (std::size_t i = 0; i < n; ++i) {
        Tensor sample = dataset.window_tensor(i);
        QttentionMap map = layer_qttention(model, sample, 0);
        double* dst = out.data() + i * dataset.win_len;
        std::copy(map.values.begin(), map.values.end(), dst);
    }
    return out;
}

}  // namespace qdiag
