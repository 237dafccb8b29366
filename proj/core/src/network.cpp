#include "qdiag/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint and dataset formats assume a little-endian host");

namespace qdiag {

namespace {

constexpr char kMagic[4] = {'Q', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error("checkpoint truncated");
    }
    return v;
}

}  // namespace

std::vector<std::size_t> ArchitectureSpec::stage_input_lengths() const {
    std::vector<std::size_t> lengths;
    std::size_t len = input_len;
    for (const auto& b : blocks) {
        lengths.push_back(len);
        len = conv_output_len(len, b.kernel, b.stride, b.pad);
        if (b.pool) len = (len + 1) / 2;
    }
    lengths.push_back(len);  // length entering flatten
    return lengths;
}

void ArchitectureSpec::validate() const {
    if (blocks.empty() || dense.empty()) {
        throw std::invalid_argument("architecture needs at least one conv block and one dense layer");
    }
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (dense.back().units != num_classes) {
        throw std::invalid_argument("final dense width " + std::to_string(dense.back().units) +
                                    " != num_classes " + std::to_string(num_classes));
    }
    std::vector<std::size_t> lengths;
    std::size_t len = input_len;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        lengths.push_back(len);
        const auto& b = blocks[i];
        if (len + 2 * b.pad < b.kernel) {
            std::ostringstream os;
            os << "block " << (i + 1) << " input length underflow; per-layer input lengths:";
            for (std::size_t j = 0; j < lengths.size(); ++j) os << " block" << (j + 1) << "=" << lengths[j];
            throw std::invalid_argument(os.str());
        }
        len = conv_output_len(len, b.kernel, b.stride, b.pad);
        if (b.pool) len = (len + 1) / 2;
    }
    if (len < 1) throw std::invalid_argument("flatten stage has zero length");
}

std::string ArchitectureSpec::to_json() const {
    nlohmann::json j;
    j["input_len"] = input_len;
    j["num_classes"] = num_classes;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : blocks) {
        j["blocks"].push_back({{"out_channels", b.out_channels},
                               {"kernel", b.kernel},
                               {"stride", b.stride},
                               {"pad", b.pad},
                               {"batchnorm", b.batchnorm},
                               {"pool", b.pool},
                               {"variant", variant_name(b.variant)}});
    }
    j["dense"] = nlohmann::json::array();
    for (const auto& d : dense) {
        j["dense"].push_back({{"units", d.units}, {"variant", variant_name(d.variant)}});
    }
    return j.dump();
}

ArchitectureSpec ArchitectureSpec::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ArchitectureSpec spec;
    spec.input_len = j.at("input_len").get<std::size_t>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& b : j.at("blocks")) {
        ConvBlockSpec cb;
        cb.out_channels = b.at("out_channels").get<std::size_t>();
        cb.kernel = b.at("kernel").get<std::size_t>();
        cb.stride = b.at("stride").get<std::size_t>();
        cb.pad = b.at("pad").get<std::size_t>();
        cb.batchnorm = b.at("batchnorm").get<bool>();
        cb.pool = b.at("pool").get<bool>();
        cb.variant = variant_from_name(b.at("variant").get<std::string>());
        spec.blocks.push_back(cb);
    }
    for (const auto& d : j.at("dense")) {
        spec.dense.push_back({d.at("units").get<std::size_t>(),
                              variant_from_name(d.at("variant").get<std::string>())});
    }
    return spec;
}

std::string profile_name(VariantProfile p) {
    switch (p) {
        case VariantProfile::kQcnnBase: return "qcnn";
        case VariantProfile::kQcnnNg: return "qcnn-ng";
        case VariantProfile::kQcnnNp: return "qcnn-np";
        case VariantProfile::kQcnnAq: return "qcnn-aq";
        case VariantProfile::kWdcnn: return "wdcnn";
    }
    return "?";
}

VariantProfile profile_from_name(const std::string& name) {
    if (name == "qcnn") return VariantProfile::kQcnnBase;
    if (name == "qcnn-ng") return VariantProfile::kQcnnNg;
    if (name == "qcnn-np") return VariantProfile::kQcnnNp;
    if (name == "qcnn-aq") return VariantProfile::kQcnnAq;
    if (name == "wdcnn") return VariantProfile::kWdcnn;
    throw std::invalid_argument("unknown profile '" + name +
                                "' (expected qcnn|qcnn-ng|qcnn-np|qcnn-aq|wdcnn)");
}

ArchitectureSpec build_backbone(VariantProfile profile, std::size_t input_len,
                                std::size_t num_classes) {
    if (input_len < 1024) {
        throw std::invalid_argument("backbone requires input_len >= 1024, got " +
                                    std::to_string(input_len));
    }
    NeuronVariant conv_variant = NeuronVariant::kQuadratic;
    NeuronVariant dense_variant = NeuronVariant::kConventional;
    switch (profile) {
        case VariantProfile::kQcnnBase: break;
        case VariantProfile::kQcnnNg: conv_variant = NeuronVariant::kNoG; break;
        case VariantProfile::kQcnnNp: conv_variant = NeuronVariant::kNoPower; break;
        case VariantProfile::kQcnnAq: dense_variant = NeuronVariant::kQuadratic; break;
        case VariantProfile::kWdcnn: conv_variant = NeuronVariant::kConventional; break;
    }

    ArchitectureSpec spec;
    spec.input_len = input_len;
    spec.num_classes = num_classes;
    spec.blocks = {
        {16, 64, 16, 24, true, true, conv_variant},
        {32, 3, 1, 1, true, true, conv_variant},
        {64, 3, 1, 1, true, true, conv_variant},
        {64, 3, 1, 1, true, true, conv_variant},
        {64, 3, 1, 1, true, true, conv_variant},
        {64, 3, 1, 0, true, true, conv_variant},
    };
    spec.dense = {{100, dense_variant}, {num_classes, dense_variant}};
    spec.validate();
    return spec;
}

Model::Model(ArchitectureSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t c_in = 1;
    std::size_t len = spec_.input_len;
    for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
        const auto& b = spec_.blocks[i];
        const std::string prefix = "block" + std::to_string(i + 1);
        conv_indices_.push_back(layers_.size());
        layers_.push_back(std::make_unique<QuadraticConv1d>(prefix + ".conv", b.variant, c_in,
                                                            b.out_channels, b.kernel, b.stride,
                                                            b.pad));
        len = conv_output_len(len, b.kernel, b.stride, b.pad);
        if (b.batchnorm) {
            layers_.push_back(std::make_unique<BatchNorm1d>(prefix + ".bn", b.out_channels));
        }
        layers_.push_back(std::make_unique<Relu>(prefix + ".relu"));
        if (b.pool) {
            layers_.push_back(std::make_unique<MaxPool1d>(prefix + ".pool"));
            len = (len + 1) / 2;
        }
        c_in = b.out_channels;
    }
    layers_.push_back(std::make_unique<Flatten>("flatten"));
    std::size_t width = c_in * len;
    for (std::size_t i = 0; i < spec_.dense.size(); ++i) {
        const auto& d = spec_.dense[i];
        const std::string prefix = "dense" + std::to_string(i + 1);
        dense_indices_.push_back(layers_.size());
        layers_.push_back(std::make_unique<QuadraticDense>(prefix, d.variant, width, d.units));
        if (i + 1 < spec_.dense.size()) {
            layers_.push_back(std::make_unique<Relu>(prefix + ".relu"));
        }
        width = d.units;
    }
}

Tensor Model::forward(const Tensor& batch, Mode mode) {
    if (batch.ndim() != 3 || batch.extent(1) != 1 || batch.extent(2) != spec_.input_len) {
        throw std::invalid_argument("model expects [B, 1, " + std::to_string(spec_.input_len) +
                                    "] input, got " + shape_to_string(batch.shape()));
    }
    Tensor x = batch;
    for (auto& layer : layers_) x = layer->forward(x, mode);
    return x;
}

Tensor Model::backward(const Tensor& dlogits) {
    Tensor d = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        for (Parameter* p : layer->parameters()) out.push_back(p);
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::state_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& layer : layers_) {
        for (auto& s : layer->state()) out.push_back(s);
    }
    return out;
}

void Model::set_threads(int threads) {
    threads_ = std::max(1, threads);
    for (auto& layer : layers_) layer->set_threads(threads_);
}

QuadraticConv1d& Model::conv(std::size_t block_index) {
    if (block_index >= conv_indices_.size()) {
        throw std::invalid_argument("block index " + std::to_string(block_index) +
                                    " out of range (model has " +
                                    std::to_string(conv_indices_.size()) + " blocks)");
    }
    return static_cast<QuadraticConv1d&>(*layers_[conv_indices_[block_index]]);
}

const QuadraticConv1d& Model::conv(std::size_t block_index) const {
    return const_cast<Model*>(this)->conv(block_index);
}

QuadraticDense& Model::dense(std::size_t dense_index) {
    if (dense_index >= dense_indices_.size()) {
        throw std::invalid_argument("dense index " + std::to_string(dense_index) +
                                    " out of range (model has " +
                                    std::to_string(dense_indices_.size()) + " dense layers)");
    }
    return static_cast<QuadraticDense&>(*layers_[dense_indices_[dense_index]]);
}

Tensor Model::block_input(const Tensor& sample, std::size_t block_index) {
    if (block_index >= conv_indices_.size()) {
        throw std::invalid_argument("block index " + std::to_string(block_index) + " out of range");
    }
    if (sample.ndim() != 2) {
        throw std::invalid_argument("block_input expects a [C, L] sample, got " +
                                    shape_to_string(sample.shape()));
    }
    Tensor x = sample.reshaped({1, sample.extent(0), sample.extent(1)});
    for (std::size_t i = 0; i < conv_indices_[block_index]; ++i) {
        x = layers_[i]->forward(x, Mode::kEval);
    }
    return x.reshaped({x.extent(1), x.extent(2)});
}

void relinear_init(Model& model, std::uint64_t seed, InitStd std_mode, double fixed_std) {
    Rng rng(seed);
    model.set_rng_seed(seed);
    // One seeded stream consumed in network order (conv blocks, then dense
    // layers) keeps the draw sequence reproducible.
    for (std::size_t i = 0; i < model.num_blocks(); ++i) {
        QuadraticParams& p = model.conv(i).params();
        const double fan_in = static_cast<double>(p.c_in * p.kernel);
        const double std = std_mode == InitStd::kScaled ? std::sqrt(2.0 / fan_in) : fixed_std;
        p.relinear_init(rng, std);
    }
    for (std::size_t i = 0; i < model.num_dense(); ++i) {
        QuadraticParams& p = model.dense(i).params();
        const double fan_in = static_cast<double>(p.c_in * p.kernel);
        const double std = std_mode == InitStd::kScaled ? std::sqrt(2.0 / fan_in) : fixed_std;
        p.relinear_init(rng, std);
    }
    for (Parameter* p : model.parameters()) {
        p->zero_grad();
        if (p->name().ends_with(".gamma")) p->value.fill(1.0);
        if (p->name().ends_with(".beta")) p->value.fill(0.0);
    }
    for (auto& [name, tensor] : model.state_tensors()) {
        if (name.ends_with("running_mean")) tensor->fill(0.0);
        if (name.ends_with("running_var")) tensor->fill(1.0);
    }
}

namespace {

void write_record(std::ostream& os, const std::string& name, const Tensor& t,
                  CheckpointDtype dtype) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    os.write(reinterpret_cast<const char*>(&dt), 1);
    write_u32(os, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    if (dtype == CheckpointDtype::kF64) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
    } else {
        std::vector<float> buf(t.numel());
        for (std::size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<float>(t[i]);
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path, CheckpointDtype dtype) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);

    nlohmann::json j = nlohmann::json::parse(model.spec().to_json());
    j["rng_seed"] = model.rng_seed();
    const std::string blob = j.dump();
    write_u32(os, static_cast<std::uint32_t>(blob.size()));
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));

    Model& m = const_cast<Model&>(model);
    for (Parameter* p : m.parameters()) write_record(os, p->name(), p->value, dtype);
    for (auto& [name, tensor] : m.state_tensors()) write_record(os, name, *tensor, dtype);
    if (!os) throw std::runtime_error("short write to '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint version error: bad magic in '" + path + "'");
    }
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint version error: got version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kVersion));
    }
    const std::uint32_t blob_len = read_u32(is);
    std::string blob(blob_len, '\0');
    if (!is.read(blob.data(), blob_len)) throw std::runtime_error("checkpoint truncated");

    nlohmann::json j = nlohmann::json::parse(blob);
    Model model(ArchitectureSpec::from_json(blob));
    model.set_rng_seed(j.value("rng_seed", std::uint64_t{0}));

    std::map<std::string, Tensor*> slots;
    for (Parameter* p : model.parameters()) slots[p->name()] = &p->value;
    for (auto& [name, tensor] : model.state_tensors()) slots[name] = tensor;

    std::size_t filled = 0;
    while (true) {
        std::uint32_t name_len = 0;
        if (!is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len))) break;  // clean EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw std::runtime_error("checkpoint truncated");
        std::uint8_t dt = 0;
        if (!is.read(reinterpret_cast<char*>(&dt), 1)) throw std::runtime_error("checkpoint truncated");
        const std::uint32_t ndim = read_u32(is);
        std::vector<std::size_t> dims(ndim);
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            dims[d] = read_u32(is);
            numel *= dims[d];
        }
        auto it = slots.find(name);
        if (it == slots.end()) {
            throw std::runtime_error("checkpoint shape error: unknown tensor '" + name + "'");
        }
        if (it->second->shape() != dims) {
            throw std::runtime_error("checkpoint shape error: '" + name + "' has shape " +
                                     shape_to_string(dims) + ", model expects " +
                                     shape_to_string(it->second->shape()));
        }
        if (dt == static_cast<std::uint8_t>(CheckpointDtype::kF64)) {
            if (!is.read(reinterpret_cast<char*>(it->second->data()),
                         static_cast<std::streamsize>(numel * sizeof(double)))) {
                throw std::runtime_error("checkpoint truncated");
            }
        } else if (dt == static_cast<std::uint8_t>(CheckpointDtype::kF32)) {
            std::vector<float> buf(numel);
            if (!is.read(reinterpret_cast<char*>(buf.data()),
                         static_cast<std::streamsize>(numel * sizeof(float)))) {
                throw std::runtime_error("checkpoint truncated");
            }
            for (std::size_t i = 0; i < numel; ++i) (*it->second)[i] = buf[i];
        } else {
            throw std::runtime_error("checkpoint version error: unknown dtype " +
                                     std::to_string(dt));
        }
        ++filled;
    }
    if (filled != slots.size()) {
        throw std::runtime_error("checkpoint truncated: " + std::to_string(filled) + " of " +
                                 std::to_string(slots.size()) + " tensors present");
    }
    return model;
}

}  // namespace qdiag
