// The six-block wide-first-kernel 1-D CNN backbone, built from an explicit
// ArchitectureSpec so hyperparameters are data, plus ReLinear initialization
// and self-describing binary checkpoints.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qdiag/layers.hpp"
#include "qdiag/tensor.hpp"

namespace qdiag {

struct ConvBlockSpec {
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;
    bool batchnorm = true;
    bool pool = true;
    NeuronVariant variant = NeuronVariant::kQuadratic;
};

struct DenseSpec {
    std::size_t units = 0;
    NeuronVariant variant = NeuronVariant::kConventional;
};

struct ArchitectureSpec {
    std::vector<ConvBlockSpec> blocks;
    std::vector<DenseSpec> dense;
    std::size_t num_classes = 0;
    std::size_t input_len = 0;

    // Signal length entering each block's conv (index i), plus the final
    // flattened width at the end. Throws with the per-layer lengths listed
    // when any stage underflows.
    std::vector<std::size_t> stage_input_lengths() const;
    void validate() const;

    std::string to_json() const;
    static ArchitectureSpec from_json(const std::string& json_text);
};

enum class VariantProfile { kQcnnBase, kQcnnNg, kQcnnNp, kQcnnAq, kWdcnn };

std::string profile_name(VariantProfile p);
VariantProfile profile_from_name(const std::string& name);

// The fixed six-block backbone. Conv layers take the profile's neuron
// variant; dense layers stay conventional except for the all-quadratic
// profile.
ArchitectureSpec build_backbone(VariantProfile profile, std::size_t input_len,
                                std::size_t num_classes);

enum class InitStd { kScaled, kFixed };  // scaled: std = sqrt(2 / fan_in)

class Model {
public:
    explicit Model(ArchitectureSpec spec);
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ArchitectureSpec& spec() const { return spec_; }

    Tensor forward(const Tensor& batch, Mode mode);  // [B, 1, L] -> [B, num_classes]
    Tensor backward(const Tensor& dlogits);

    std::vector<Parameter*> parameters();
    std::vector<std::pair<std::string, Tensor*>> state_tensors();
    void set_threads(int threads);
    int threads() const { return threads_; }

    std::size_t num_blocks() const { return conv_indices_.size(); }
    QuadraticConv1d& conv(std::size_t block_index);
    const QuadraticConv1d& conv(std::size_t block_index) const;
    std::size_t num_dense() const { return dense_indices_.size(); }
    QuadraticDense& dense(std::size_t dense_index);

    // EVAL-mode forward of one [1, L] sample, stopping at the input of block
    // `block_index`'s conv layer. Used by the qttention extraction.
    Tensor block_input(const Tensor& sample, std::size_t block_index);

    std::uint64_t rng_seed() const { return rng_seed_; }
    void set_rng_seed(std::uint64_t seed) { rng_seed_ = seed; }

private:
    ArchitectureSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> conv_indices_;   // layer index of each block's conv
    std::vector<std::size_t> dense_indices_;  // layer index of each dense layer
    std::uint64_t rng_seed_ = 0;
    int threads_ = 1;
};

// ReLinear initialization: every quadratic neuron degenerates to the
// conventional neuron it contains. w_r ~ N(0, std), b_r = 0, w_g = 0,
// b_g = 1, w_b = 0, c = 0; batchnorm reset to identity.
void relinear_init(Model& model, std::uint64_t seed, InitStd std_mode = InitStd::kScaled,
                   double fixed_std = 0.01);

enum class CheckpointDtype : std::uint8_t { kF64 = 0, kF32 = 1 };

void save_checkpoint(const Model& model, const std::string& path,
                     CheckpointDtype dtype = CheckpointDtype::kF64);
Model load_checkpoint(const std::string& path);

}  // namespace qdiag
