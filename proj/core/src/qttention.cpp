#include "qdiag/qttention.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qdiag {

std::string grad_mode_name(QttGradMode m) {
    return m == QttGradMode::kTemporalDiff ? "temporal-diff" : "exact-sum-derivative";
}

QttGradMode grad_mode_from_name(const std::string& name) {
    if (name == "temporal-diff") return QttGradMode::kTemporalDiff;
    if (name == "exact-sum-derivative") return QttGradMode::kExactSumDerivative;
    throw std::invalid_argument("unknown grad mode '" + name +
                                "' (expected temporal-diff|exact-sum-derivative)");
}

std::string aggregation_name(ChannelAggregation a) {
    return a == ChannelAggregation::kMeanAbs ? "mean-abs" : "max-abs";
}

ChannelAggregation aggregation_from_name(const std::string& name) {
    if (name == "mean-abs") return ChannelAggregation::kMeanAbs;
    if (name == "max-abs") return ChannelAggregation::kMaxAbs;
    throw std::invalid_argument("unknown aggregation '" + name + "' (expected mean-abs|max-abs)");
}

Tensor raw_qtt_window(std::span<const double> x, std::span<const double> w_r,
                      std::span<const double> w_g, std::span<const double> w_b) {
    const std::size_t n = x.size();
    if (w_r.size() != n || w_g.size() != n || w_b.size() != n) {
        throw std::invalid_argument("raw_qtt_window: length mismatch (x " + std::to_string(n) +
                                    ", w_r " + std::to_string(w_r.size()) + ", w_g " +
                                    std::to_string(w_g.size()) + ", w_b " +
                                    std::to_string(w_b.size()) + ")");
    }
    const double s = dot(x, w_r);
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * w_b[i] + w_g[i] * s;
    return out;
}

namespace {

// |central difference| along one contiguous segment, one-sided at both ends.
void temporal_diff_abs(const double* raw, double* out, std::size_t n) {
    if (n < 2) throw std::invalid_argument("temporal-diff grad needs a window of length >= 2");
    out[0] = std::abs(raw[1] - raw[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = std::abs(0.5 * (raw[i + 1] - raw[i - 1]));
    out[n - 1] = std::abs(raw[n - 1] - raw[n - 2]);
}

}  // namespace

Tensor qtt_grad(const Tensor& raw, QttGradMode mode, std::span<const double> w_r,
                std::span<const double> w_g, std::span<const double> w_b) {
    const std::size_t n = raw.numel();
    Tensor out({std::max<std::size_t>(n, 1)});
    if (mode == QttGradMode::kTemporalDiff) {
        temporal_diff_abs(raw.data(), out.data(), n);
        return out;
    }
    if (w_r.size() != n || w_g.size() != n || w_b.size() != n) {
        throw std::invalid_argument("exact-sum-derivative grad needs w_r, w_g, w_b spans "
                                    "matching the window length");
    }
    double sum_g = 0.0;
    for (double v : w_g) sum_g += v;
    for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(w_b[i] + sum_g * w_r[i]);
    return out;
}

namespace {

// Shared scatter/average assembly. raw_fill writes the per-window
// contribution vector (length C_in*K) for output channel co and window t.
template <typename RawFill, typename GradFill>
QttentionMap assemble_impl(const Tensor& layer_input, std::size_t c_out, std::size_t c_in,
                           std::size_t kernel, std::size_t stride, std::size_t pad,
                           ChannelAggregation aggregation, QttGradMode grad_mode,
                           RawFill&& raw_fill, GradFill&& exact_fill) {
    const Unfolded uf = unfold(layer_input, kernel, stride, pad);
    const std::size_t len = uf.input_len;
    const std::size_t n = c_in * kernel;
    const std::size_t pairs = c_out * c_in;

    std::vector<double> sums(pairs * len, 0.0);
    std::vector<std::size_t> coverage(len, 0);
    std::vector<double> raw(n), grad(n);

    for (std::size_t t = 0; t < uf.num_windows; ++t) {
        const double* v = uf.windows.data() + t * n;
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(t * stride) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t co = 0; co < c_out; ++co) {
            if (grad_mode == QttGradMode::kTemporalDiff) {
                raw_fill(co, v, raw.data());
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    temporal_diff_abs(raw.data() + ci * kernel, grad.data() + ci * kernel, kernel);
                }
            } else {
                exact_fill(co, grad.data());
            }
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                double* dst = sums.data() + (co * c_in + ci) * len;
                for (std::size_t k = 0; k < kernel; ++k) {
                    const std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(k);
                    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
                    dst[pos] += grad[ci * kernel + k];
                }
            }
        }
        // coverage counts windows, once per position regardless of channels
        for (std::ptrdiff_t pos = std::max<std::ptrdiff_t>(start, 0);
             pos < std::min(start + static_cast<std::ptrdiff_t>(kernel),
                            static_cast<std::ptrdiff_t>(len));
             ++pos) {
            ++coverage[static_cast<std::size_t>(pos)];
        }
    }

    QttentionMap map;
    map.aggregation = aggregation;
    map.grad_mode = grad_mode;
    map.values.assign(len, 0.0);
    map.coverage = coverage;
    for (std::size_t pos = 0; pos < len; ++pos) {
        if (coverage[pos] == 0) continue;
        double agg = 0.0;
        for (std::size_t p = 0; p < pairs; ++p) {
            const double v = sums[p * len + pos] / static_cast<double>(coverage[pos]);
            if (aggregation == ChannelAggregation::kMeanAbs) {
                agg += v;
            } else {
                agg = std::max(agg, v);
            }
        }
        if (aggregation == ChannelAggregation::kMeanAbs) agg /= static_cast<double>(pairs);
        map.values[pos] = agg;
    }
    return map;
}

}  // namespace

QttentionMap assemble_map(const Tensor& layer_input, const QuadraticParams& params,
                          std::size_t stride, std::size_t pad, ChannelAggregation aggregation,
                          QttGradMode grad_mode) {
    if (params.variant == NeuronVariant::kConventional) {
        throw std::invalid_argument("assemble_map: layer is conventional; use "
                                    "conventional_saliency instead");
    }
    if (layer_input.ndim() != 2 || layer_input.extent(0) != params.c_in) {
        throw std::invalid_argument("assemble_map: expected [" + std::to_string(params.c_in) +
                                    ", L] input, got " + shape_to_string(layer_input.shape()));
    }
    const std::size_t n = params.c_in * params.kernel;
    const double* wr = params.w_r.value.data();
    const double* wg = params.w_g ? params.w_g->value.data() : nullptr;
    const double* wb = params.w_b ? params.w_b->value.data() : nullptr;

    // missing ablation groups act as zeros
    std::vector<double> zeros;
    if (!wg || !wb) zeros.assign(n, 0.0);
    auto raw_fill = [&](std::size_t co, const double* v, double* raw) {
        const double* wr_row = wr + co * n;
        const double* wg_row = wg ? wg + co * n : zeros.data();
        const double* wb_row = wb ? wb + co * n : zeros.data();
        const double s = dot(std::span(v, n), std::span(wr_row, n));
        for (std::size_t i = 0; i < n; ++i) raw[i] = v[i] * wb_row[i] + wg_row[i] * s;
    };
    auto exact_fill = [&](std::size_t co, double* grad) {
        const double* wr_row = wr + co * n;
        const double* wg_row = wg ? wg + co * n : zeros.data();
        const double* wb_row = wb ? wb + co * n : zeros.data();
        double sum_g = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum_g += wg_row[i];
        for (std::size_t i = 0; i < n; ++i) grad[i] = std::abs(wb_row[i] + sum_g * wr_row[i]);
    };
    return assemble_impl(layer_input, params.c_out, params.c_in, params.kernel, stride, pad,
                         aggregation, grad_mode, raw_fill, exact_fill);
}

QttentionMap layer_qttention(Model& model, const Tensor& signal, std::size_t layer_index,
                             ChannelAggregation aggregation, QttGradMode grad_mode) {
    const QuadraticConv1d& conv = model.conv(layer_index);
    if (conv.params().variant == NeuronVariant::kConventional) {
        throw std::invalid_argument("layer_qttention: block " + std::to_string(layer_index) +
                                    " is conventional; use conventional_saliency");
    }
    Tensor input = model.block_input(signal, layer_index);
    QttentionMap map =
        assemble_map(input, conv.params(), conv.stride(), conv.pad(), aggregation, grad_mode);
    map.layer_index = static_cast<int>(layer_index);
    return map;
}

QttentionMap upsample_map(const QttentionMap& map, std::size_t target_len) {
    const std::size_t len = map.size();
    if (target_len < len) {
        throw std::invalid_argument("upsample_map: target length " + std::to_string(target_len) +
                                    " below map length " + std::to_string(len));
    }
    if (target_len == len) return map;
    QttentionMap out;
    out.layer_index = map.layer_index;
    out.aggregation = map.aggregation;
    out.grad_mode = map.grad_mode;
    out.values.resize(target_len);
    out.coverage.resize(target_len);
    if (len == 1) {
        std::fill(out.values.begin(), out.values.end(), map.values[0]);
        std::fill(out.coverage.begin(), out.coverage.end(), map.coverage[0]);
        return out;
    }
    const double scale = static_cast<double>(len - 1) / static_cast<double>(target_len - 1);
    for (std::size_t j = 0; j < target_len; ++j) {
        const double s = static_cast<double>(j) * scale;
        std::size_t i0 = static_cast<std::size_t>(s);
        if (i0 >= len - 1) i0 = len - 2;
        const double frac = s - static_cast<double>(i0);
        out.values[j] = map.values[i0] * (1.0 - frac) + map.values[i0 + 1] * frac;
        out.coverage[j] = map.coverage[frac < 0.5 ? i0 : i0 + 1];
    }
    return out;
}

QttentionMap conventional_saliency(const Tensor& layer_input, const QuadraticParams& params,
                                   std::size_t stride, std::size_t pad,
                                   ChannelAggregation aggregation, QttGradMode grad_mode) {
    if (layer_input.ndim() != 2 || layer_input.extent(0) != params.c_in) {
        throw std::invalid_argument("conventional_saliency: expected [" +
                                    std::to_string(params.c_in) + ", L] input, got " +
                                    shape_to_string(layer_input.shape()));
    }
    const std::size_t n = params.c_in * params.kernel;
    const double* wr = params.w_r.value.data();
    auto raw_fill = [&](std::size_t co, const double* v, double* raw) {
        const double* wr_row = wr + co * n;
        for (std::size_t i = 0; i < n; ++i) raw[i] = v[i] * wr_row[i];
    };
    auto exact_fill = [&](std::size_t co, double* grad) {
        const double* wr_row = wr + co * n;
        for (std::size_t i = 0; i < n; ++i) grad[i] = std::abs(wr_row[i]);
    };
    return assemble_impl(layer_input, params.c_out, params.c_in, params.kernel, stride, pad,
                         aggregation, grad_mode, raw_fill, exact_fill);
}

void export_map(const QttentionMap& map, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "index,value,coverage\n";
    char line[80];
    for (std::size_t i = 0; i < map.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%zu\n", i, map.values[i], map.coverage[i]);
        os << line;
    }
    if (!os) throw std::runtime_error("short write to '" + path + "'");
}

QttentionMap import_map(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string header;
    if (!std::getline(is, header) || header != "index,value,coverage") {
        throw std::runtime_error("'" + path + "' is not a qttention map CSV");
    }
    QttentionMap map;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t index = 0, cov = 0;
        double value = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%zu", &index, &value, &cov) != 3) {
            throw std::runtime_error("bad map CSV line: " + line);
        }
        if (index != map.values.size()) {
            throw std::runtime_error("map CSV indices must be consecutive from 0");
        }
        map.values.push_back(value);
        map.coverage.push_back(cov);
    }
    return map;
}

}  // namespace qdiag
