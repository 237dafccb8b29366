// Forward and backward passes for quadratic and conventional 1-D layers.
//
// A quadratic neuron computes (x.w_r + b_r)(x.w_g + b_g) + (x*x).w_b + c
// before activation. The ablation variants drop the g factor or the power
// term; the conventional neuron keeps only the r branch. All backward passes
// are analytic and are verified against finite differences in the tests.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdiag/tensor.hpp"

namespace qdiag {

enum class NeuronVariant { kQuadratic, kNoG, kNoPower, kConventional };
enum class Mode { kTrain, kEval };

std::string variant_name(NeuronVariant v);
NeuronVariant variant_from_name(const std::string& name);
bool variant_has_g(NeuronVariant v);
bool variant_has_power(NeuronVariant v);

// The six parameter groups of one quadratic layer. (w_r, b_r) train at the
// normal rate; (w_g, b_g, w_b, c) at the reduced rate. Variants that drop a
// term store no tensors for it.
struct QuadraticParams {
    NeuronVariant variant = NeuronVariant::kQuadratic;
    std::size_t c_out = 0, c_in = 0, kernel = 0;

    Parameter w_r;  // [C_out, C_in, K]
    Parameter b_r;  // [C_out]
    std::optional<Parameter> w_g, b_g;  // shapes as w_r / b_r
    std::optional<Parameter> w_b, c;

    QuadraticParams(const std::string& name_prefix, NeuronVariant variant,
                    std::size_t c_out, std::size_t c_in, std::size_t kernel);

    std::vector<Parameter*> parameters();
    std::size_t weight_count() const;  // weights only, excludes biases
    bool is_relinear_init() const;     // w_g==0, b_g==1, w_b==0, c==0 where present

    // Degenerates the layer to its conventional form: zeroes the quadratic
    // groups, sets b_g to one, and draws w_r ~ N(0, std); b_r = 0.
    void relinear_init(Rng& rng, double w_r_std);
};

// Pre-activation of a single neuron on one receptive field. Weight spans must
// be empty for groups the variant does not carry.
double quadratic_neuron_forward(std::span<const double> x, std::span<const double> w_r,
                                double b_r, std::span<const double> w_g, double b_g,
                                std::span<const double> w_b, double c, NeuronVariant variant);

class Layer {
public:
    virtual ~Layer() = default;

    // x is [B, ...]. TRAIN mode caches activations for backward and lets
    // batchnorm update its running statistics; EVAL is pure.
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;

    // dout matches the last forward output; returns d(loss)/d(input) and
    // accumulates parameter gradients (summed, zeroed by the optimizer).
    virtual Tensor backward(const Tensor& dout) = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    // Non-trained persistent state (batchnorm running stats), for checkpoints.
    virtual std::vector<std::pair<std::string, Tensor*>> state() { return {}; }

    virtual const std::string& name() const = 0;
    void set_threads(int threads) { threads_ = threads; }

protected:
    int threads_ = 1;
};

// 1-D convolution with quadratic neurons: each output element applies one
// neuron to the flattened [C_in * K] receptive field.
class QuadraticConv1d : public Layer {
public:
    QuadraticConv1d(std::string name, NeuronVariant variant, std::size_t c_in, std::size_t c_out,
                    std::size_t kernel, std::size_t stride, std::size_t pad);

    Tensor forward(const Tensor& x, Mode mode) override;  // [B, C_in, L] -> [B, C_out, L_out]
    Tensor backward(const Tensor& dout) override;
    std::vector<Parameter*> parameters() override { return params_.parameters(); }
    const std::string& name() const override { return name_; }

    QuadraticParams& params() { return params_; }
    const QuadraticParams& params() const { return params_; }
    std::size_t stride() const { return stride_; }
    std::size_t pad() const { return pad_; }
    std::size_t output_len(std::size_t input_len) const;

private:
    std::string name_;
    QuadraticParams params_;
    std::size_t stride_, pad_;

    // flat caches from the last forward, reused across batches
    std::vector<double> win_;       // [B, T, C_in*K] unfolded windows
    std::vector<double> r_, g_;     // [B, T, C_out] factor values for backward
    std::size_t batch_ = 0, in_len_ = 0, t_count_ = 0;
};

// Dense layer of quadratic neurons; a [D] input is one receptive field.
class QuadraticDense : public Layer {
public:
    QuadraticDense(std::string name, NeuronVariant variant, std::size_t in_dim,
                   std::size_t units);

    Tensor forward(const Tensor& x, Mode mode) override;  // [B, D] -> [B, units]
    Tensor backward(const Tensor& dout) override;
    std::vector<Parameter*> parameters() override { return params_.parameters(); }
    const std::string& name() const override { return name_; }

    QuadraticParams& params() { return params_; }
    const QuadraticParams& params() const { return params_; }

private:
    std::string name_;
    QuadraticParams params_;
    Tensor x_cache_, r_cache_, g_cache_;
};

class Relu : public Layer {
public:
    explicit Relu(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dout) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    Tensor x_cache_;
};

// Width-2, stride-2 max pooling over the last axis. Odd lengths are right-
// padded with -infinity so the pad can never win the max. Argmax positions
// are kept for backward.
class MaxPool1d : public Layer {
public:
    explicit MaxPool1d(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;  // [B, C, L] -> [B, C, ceil(L/2)]
    Tensor backward(const Tensor& dout) override;
    const std::string& name() const override { return name_; }

    const std::vector<std::size_t>& argmax() const { return argmax_; }

private:
    std::string name_;
    std::vector<std::size_t> argmax_;  // flat input index per output element
    std::vector<std::size_t> in_shape_;
};

// Per-channel batch normalization over [B, C, L]. Training mode normalizes
// with batch statistics and updates running estimates; eval mode uses the
// running estimates only.
class BatchNorm1d : public Layer {
public:
    BatchNorm1d(std::string name, std::size_t channels, double momentum = 0.1,
                double eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& dout) override;
    std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
    std::vector<std::pair<std::string, Tensor*>> state() override;
    const std::string& name() const override { return name_; }

    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    std::string name_;
    std::size_t channels_;
    double momentum_, eps_;
    Parameter gamma_, beta_;
    Tensor running_mean_, running_var_;

    Tensor xhat_cache_;               // normalized activations from TRAIN forward
    std::vector<double> inv_std_;     // 1/sqrt(var+eps) per channel
    bool train_cached_ = false;
};

class Flatten : public Layer {
public:
    explicit Flatten(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x, Mode mode) override;  // [B, C, L] -> [B, C*L]
    Tensor backward(const Tensor& dout) override;
    const std::string& name() const override { return name_; }

private:
    std::string name_;
    std::vector<std::size_t> in_shape_;
};

}  // namespace qdiag
