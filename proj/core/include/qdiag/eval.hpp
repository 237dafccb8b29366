// Accuracy, confusion matrices, parameter and FLOP accounting (including the
// channel-attention comparison), and the qttention-features downstream
// classifier experiment.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdiag/network.hpp"
#include "qdiag/qttention.hpp"
#include "qdiag/signals.hpp"

namespace qdiag {

double accuracy(std::span<const int> preds, std::span<const int> labels);

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<long> counts;  // rows = true class, cols = predicted

    long at(std::size_t truth, std::size_t pred) const { return counts[truth * num_classes + pred]; }
    long total() const;
    long trace() const;
    // Faulty samples predicted as the given healthy class (column sum minus
    // the healthy-healthy cell).
    long faults_judged_healthy(std::size_t healthy_class) const;
    std::vector<double> per_class_recall() const;

    void write_csv(const std::string& path) const;  // true,pred,count
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels,
                          std::size_t num_classes);

struct ParamCount {
    std::size_t total = 0;
    std::size_t conv_weights = 0;  // conv weight tensors only, biases excluded
    std::vector<std::pair<std::string, std::size_t>> per_layer;
};

ParamCount count_params(const Model& model);

struct AttentionParamEstimate {
    double channel_attention = 0.0;  // (C*H*W) + 2*C^5/r^2
    double qttention = 0.0;          // 3*(C*H*W)
};

AttentionParamEstimate attention_param_estimate(std::size_t c, std::size_t h, std::size_t w,
                                                double r);

// Multiply-accumulate count per sample: conv and dense MACs (x3 for
// quadratic variants, plus two elementwise ops per quadratic output).
std::size_t flops_estimate(const ArchitectureSpec& spec);

// One-vs-rest linear hinge classifier trained by SGD over standardized
// features. Stands in for the SVM in the qttention-features experiment.
struct LinearClassifier {
    std::size_t num_classes = 0, dim = 0;
    std::vector<double> weights;  // [num_classes, dim]
    std::vector<double> bias;     // [num_classes]
    std::vector<double> feat_mean, feat_std;

    int predict(std::span<const double> features) const;
    double accuracy_on(const Tensor& features, std::span<const int> labels) const;
};

LinearClassifier train_linear_classifier(const Tensor& features, const std::vector<int>& labels,
                                         std::size_t num_classes, std::size_t epochs, double lr,
                                         std::uint64_t seed);

enum class FeatureSource { kRaw, kFirstLayerOutput, kFirstLayerQttention };

std::string feature_source_name(FeatureSource s);

// Feature matrix [N, D] for every sample of the dataset. RAW flattens the
// window; FIRST_LAYER_OUTPUT channel-averages the first conv block's output;
// FIRST_LAYER_QTTENTION uses the layer-0 qttention map.
Tensor qttention_feature_pipeline(Model& model, const Dataset& dataset, FeatureSource source);

}  // namespace qdiag
