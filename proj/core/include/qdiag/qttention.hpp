// Neuron-induced attention maps. Factorizing the quadratic function
//   x.(x*w_b + w_g*(x.w_r) + const)
// gives an input-dependent factor per receptive field, RawQtt(x) =
// x*w_b + w_g*(x.w_r). A gradient operator plus absolute value turns it into
// a non-negative importance map; window maps are scattered onto the input
// timeline with overlap averaging, channel-aggregated, and optionally
// upsampled back to input resolution across pooled layers.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdiag/layers.hpp"
#include "qdiag/network.hpp"
#include "qdiag/tensor.hpp"

namespace qdiag {

enum class QttGradMode {
    kTemporalDiff,        // discrete derivative along the window axis (default)
    kExactSumDerivative,  // |d(sum RawQtt)/dx_k|; input-independent, for comparison
};
enum class ChannelAggregation { kMeanAbs, kMaxAbs };

std::string grad_mode_name(QttGradMode m);
QttGradMode grad_mode_from_name(const std::string& name);
std::string aggregation_name(ChannelAggregation a);
ChannelAggregation aggregation_from_name(const std::string& name);

struct QttentionMap {
    int layer_index = -1;
    std::vector<double> values;         // importance per input-timeline position, >= 0
    std::vector<std::size_t> coverage;  // contributing-window count per position
    ChannelAggregation aggregation = ChannelAggregation::kMeanAbs;
    QttGradMode grad_mode = QttGradMode::kTemporalDiff;

    std::size_t size() const { return values.size(); }
};

// RawQtt over one receptive field: x*w_b + w_g*(x.w_r), biases excluded.
Tensor raw_qtt_window(std::span<const double> x, std::span<const double> w_r,
                      std::span<const double> w_g, std::span<const double> w_b);

// Post-processing of a raw window map. kTemporalDiff uses central differences
// with one-sided edges, then absolute value; kExactSumDerivative evaluates
// |w_b_k + sum(w_g) * w_r_k| directly.
Tensor qtt_grad(const Tensor& raw, QttGradMode mode, std::span<const double> w_r = {},
                std::span<const double> w_g = {}, std::span<const double> w_b = {});

// Full map for one quadratic layer on its input feature map. Missing
// parameter groups (ablation variants) behave as zeros; conventional layers
// are rejected in favor of conventional_saliency.
QttentionMap assemble_map(const Tensor& layer_input, const QuadraticParams& params,
                          std::size_t stride, std::size_t pad,
                          ChannelAggregation aggregation = ChannelAggregation::kMeanAbs,
                          QttGradMode grad_mode = QttGradMode::kTemporalDiff);

// EVAL forward to the chosen block's input, then assemble_map there.
QttentionMap layer_qttention(Model& model, const Tensor& signal, std::size_t layer_index,
                             ChannelAggregation aggregation = ChannelAggregation::kMeanAbs,
                             QttGradMode grad_mode = QttGradMode::kTemporalDiff);

// Linear interpolation to target_len with endpoints preserved; coverage
// flags follow the nearest source position.
QttentionMap upsample_map(const QttentionMap& map, std::size_t target_len);

// The conventional analogue (|Grad(x.w)| per receptive field) pushed through
// the identical scatter/average pipeline, for side-by-side comparison.
QttentionMap conventional_saliency(const Tensor& layer_input, const QuadraticParams& params,
                                   std::size_t stride, std::size_t pad,
                                   ChannelAggregation aggregation = ChannelAggregation::kMeanAbs,
                                   QttGradMode grad_mode = QttGradMode::kTemporalDiff);

void export_map(const QttentionMap& map, const std::string& path);  // index,value,coverage
QttentionMap import_map(const std::string& path);

}  // namespace qdiag
