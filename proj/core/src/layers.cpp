#include "qdiag/layers.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "veckit.hpp"

namespace qdiag {

using detail::vaxpy;
using detail::vaxpy2;
using detail::vaxpy_sq;
using detail::vdot;
using detail::vdot3;

namespace {

struct Deriv {
    double dr = 0.0, dg = 0.0, dpow = 0.0;
};

Deriv neuron_backward(NeuronVariant variant, double r, double g, double d) {
    Deriv out;
    switch (variant) {
        case NeuronVariant::kQuadratic:
            out.dr = g * d;
            out.dg = r * d;
            out.dpow = d;
            break;
        case NeuronVariant::kNoG:
            out.dr = d;
            out.dpow = d;
            break;
        case NeuronVariant::kNoPower:
            out.dr = g * d;
            out.dg = r * d;
            break;
        case NeuronVariant::kConventional:
            out.dr = d;
            break;
    }
    return out;
}

double combine(NeuronVariant variant, double r, double g, double pow_term) {
    switch (variant) {
        case NeuronVariant::kQuadratic: return r * g + pow_term;
        case NeuronVariant::kNoG: return r + pow_term;
        case NeuronVariant::kNoPower: return r * g;
        case NeuronVariant::kConventional: return r;
    }
    return 0.0;
}

}  // namespace

std::string variant_name(NeuronVariant v) {
    switch (v) {
        case NeuronVariant::kQuadratic: return "quadratic";
        case NeuronVariant::kNoG: return "no_g";
        case NeuronVariant::kNoPower: return "no_power";
        case NeuronVariant::kConventional: return "conventional";
    }
    return "?";
}

NeuronVariant variant_from_name(const std::string& name) {
    if (name == "quadratic") return NeuronVariant::kQuadratic;
    if (name == "no_g") return NeuronVariant::kNoG;
    if (name == "no_power") return NeuronVariant::kNoPower;
    if (name == "conventional") return NeuronVariant::kConventional;
    throw std::invalid_argument("unknown neuron variant '" + name + "'");
}

bool variant_has_g(NeuronVariant v) {
    return v == NeuronVariant::kQuadratic || v == NeuronVariant::kNoPower;
}

bool variant_has_power(NeuronVariant v) {
    return v == NeuronVariant::kQuadratic || v == NeuronVariant::kNoG;
}

QuadraticParams::QuadraticParams(const std::string& prefix, NeuronVariant variant,
                                 std::size_t c_out, std::size_t c_in, std::size_t kernel)
    : variant(variant), c_out(c_out), c_in(c_in), kernel(kernel),
      w_r(prefix + ".w_r", Tensor({c_out, c_in, kernel}), LrGroup::kRGroup),
      b_r(prefix + ".b_r", Tensor({c_out}), LrGroup::kRGroup) {
    if (variant_has_g(variant)) {
        w_g.emplace(prefix + ".w_g", Tensor({c_out, c_in, kernel}), LrGroup::kGbGroup);
        b_g.emplace(prefix + ".b_g", Tensor({c_out}), LrGroup::kGbGroup);
    }
    if (variant_has_power(variant)) {
        w_b.emplace(prefix + ".w_b", Tensor({c_out, c_in, kernel}), LrGroup::kGbGroup);
        c.emplace(prefix + ".c", Tensor({c_out}), LrGroup::kGbGroup);
    }
}

std::vector<Parameter*> QuadraticParams::parameters() {
    std::vector<Parameter*> out{&w_r, &b_r};
    if (w_g) out.push_back(&*w_g);
    if (b_g) out.push_back(&*b_g);
    if (w_b) out.push_back(&*w_b);
    if (c) out.push_back(&*c);
    return out;
}

std::size_t QuadraticParams::weight_count() const {
    std::size_t per_group = c_out * c_in * kernel;
    std::size_t groups = 1 + (w_g ? 1 : 0) + (w_b ? 1 : 0);
    return groups * per_group;
}

bool QuadraticParams::is_relinear_init() const {
    auto all_equal = [](const Tensor& t, double v) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            if (t[i] != v) return false;
        }
        return true;
    };
    if (w_g && !all_equal(w_g->value, 0.0)) return false;
    if (b_g && !all_equal(b_g->value, 1.0)) return false;
    if (w_b && !all_equal(w_b->value, 0.0)) return false;
    if (c && !all_equal(c->value, 0.0)) return false;
    return true;
}

void QuadraticParams::relinear_init(Rng& rng, double w_r_std) {
    for (std::size_t i = 0; i < w_r.value.numel(); ++i) w_r.value[i] = w_r_std * rng.normal();
    b_r.value.fill(0.0);
    if (w_g) w_g->value.fill(0.0);
    if (b_g) b_g->value.fill(1.0);
    if (w_b) w_b->value.fill(0.0);
    if (c) c->value.fill(0.0);
}

double quadratic_neuron_forward(std::span<const double> x, std::span<const double> w_r,
                                double b_r, std::span<const double> w_g, double b_g,
                                std::span<const double> w_b, double c, NeuronVariant variant) {
    if (x.size() != w_r.size()) {
        throw std::invalid_argument("quadratic neuron: input length " + std::to_string(x.size()) +
                                    " does not match weight length " + std::to_string(w_r.size()));
    }
    const double r = vdot(x.data(), w_r.data(), x.size()) + b_r;
    double g = 0.0;
    if (variant_has_g(variant)) {
        if (w_g.size() != x.size()) {
            throw std::invalid_argument("quadratic neuron: w_g length mismatch");
        }
        g = vdot(x.data(), w_g.data(), x.size()) + b_g;
    }
    double pow_term = 0.0;
    if (variant_has_power(variant)) {
        if (w_b.size() != x.size()) {
            throw std::invalid_argument("quadratic neuron: w_b length mismatch");
        }
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i] * w_b[i];
        pow_term = s + c;
    }
    return combine(variant, r, g, pow_term);
}

QuadraticConv1d::QuadraticConv1d(std::string name, NeuronVariant variant, std::size_t c_in,
                                 std::size_t c_out, std::size_t kernel, std::size_t stride,
                                 std::size_t pad)
    : name_(std::move(name)), params_(name_, variant, c_out, c_in, kernel),
      stride_(stride), pad_(pad) {
    if (stride_ < 1) throw std::invalid_argument(name_ + ": stride must be >= 1");
}

std::size_t QuadraticConv1d::output_len(std::size_t input_len) const {
    return conv_output_len(input_len, params_.kernel, stride_, pad_);
}

Tensor QuadraticConv1d::forward(const Tensor& x, Mode) {
    if (x.ndim() != 3 || x.extent(1) != params_.c_in) {
        throw std::invalid_argument(name_ + ": expected [B, " + std::to_string(params_.c_in) +
                                    ", L] input, got " + shape_to_string(x.shape()));
    }
    const std::size_t batch = x.extent(0);
    const std::size_t len = x.extent(2);
    const std::size_t t_count = output_len(len);
    const std::size_t kernel = params_.kernel;
    const std::size_t n = params_.c_in * kernel;
    const bool has_g = variant_has_g(params_.variant);
    const bool has_pow = variant_has_power(params_.variant);

    batch_ = batch;
    in_len_ = len;
    t_count_ = t_count;
    win_.resize(batch * t_count * n);
    r_.resize(batch * t_count * params_.c_out);
    if (has_g) g_.resize(batch * t_count * params_.c_out);

    Tensor out({batch, params_.c_out, t_count});

    const double* wr = params_.w_r.value.data();
    const double* br = params_.b_r.value.data();
    const double* wg = has_g ? params_.w_g->value.data() : nullptr;
    const double* bg = has_g ? params_.b_g->value.data() : nullptr;
    const double* wb = has_pow ? params_.w_b->value.data() : nullptr;
    const double* pc = has_pow ? params_.c->value.data() : nullptr;

    auto run = [&]<bool kHasG, bool kHasPow>() {
        parallel_for(batch, threads_, [&](std::size_t b) {
            const double* xb = x.data() + b * params_.c_in * len;
            double* wins = win_.data() + b * t_count * n;
            // unfold: copy the valid span per channel, zero the padding
            for (std::size_t t = 0; t < t_count; ++t) {
                const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * stride_) -
                                             static_cast<std::ptrdiff_t>(pad_);
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(start, 0);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(
                    start + static_cast<std::ptrdiff_t>(kernel),
                    static_cast<std::ptrdiff_t>(len));
                double* dst = wins + t * n;
                for (std::size_t ci = 0; ci < params_.c_in; ++ci, dst += kernel) {
                    if (lo >= hi) {
                        std::memset(dst, 0, kernel * sizeof(double));
                        continue;
                    }
                    const std::size_t lead = static_cast<std::size_t>(lo - start);
                    const std::size_t valid = static_cast<std::size_t>(hi - lo);
                    if (lead) std::memset(dst, 0, lead * sizeof(double));
                    std::memcpy(dst + lead, xb + ci * len + lo, valid * sizeof(double));
                    if (lead + valid < kernel) {
                        std::memset(dst + lead + valid, 0,
                                    (kernel - lead - valid) * sizeof(double));
                    }
                }
            }
            double* rb = r_.data() + b * t_count * params_.c_out;
            double* gb_cache = has_g ? g_.data() + b * t_count * params_.c_out : nullptr;
            double* ob = out.data() + b * params_.c_out * t_count;
            for (std::size_t t = 0; t < t_count; ++t) {
                const double* u = wins + t * n;
                for (std::size_t co = 0; co < params_.c_out; ++co) {
                    const detail::Dot3 d = vdot3<kHasG, kHasPow>(
                        u, wr + co * n, kHasG ? wg + co * n : nullptr,
                        kHasPow ? wb + co * n : nullptr, n);
                    const double r = d.r + br[co];
                    double g = 0.0, pow_term = 0.0;
                    if constexpr (kHasG) g = d.g + bg[co];
                    if constexpr (kHasPow) pow_term = d.p + pc[co];
                    rb[t * params_.c_out + co] = r;
                    if constexpr (kHasG) gb_cache[t * params_.c_out + co] = g;
                    ob[co * t_count + t] = combine(params_.variant, r, g, pow_term);
                }
            }
        });
    };
    if (has_g && has_pow) {
        run.operator()<true, true>();
    } else if (has_g) {
        run.operator()<true, false>();
    } else if (has_pow) {
        run.operator()<false, true>();
    } else {
        run.operator()<false, false>();
    }
    return out;
}

Tensor QuadraticConv1d::backward(const Tensor& dout) {
    const std::size_t batch = batch_;
    if (batch == 0 || dout.ndim() != 3 || dout.extent(0) != batch ||
        dout.extent(1) != params_.c_out || dout.extent(2) != t_count_) {
        throw std::invalid_argument(name_ + ": backward shape mismatch");
    }
    const std::size_t t_count = t_count_;
    const std::size_t kernel = params_.kernel;
    const std::size_t n = params_.c_in * kernel;
    const bool has_g = variant_has_g(params_.variant);
    const bool has_pow = variant_has_power(params_.variant);

    const double* wr = params_.w_r.value.data();
    const double* wg = has_g ? params_.w_g->value.data() : nullptr;
    const double* wb = has_pow ? params_.w_b->value.data() : nullptr;

    // Parameter gradients: one worker per output channel, samples and windows
    // visited in a fixed order, so sums do not depend on the thread count.
    parallel_for(params_.c_out, threads_, [&](std::size_t co) {
        double* dwr = params_.w_r.grad.data() + co * n;
        double* dwg = has_g ? params_.w_g->grad.data() + co * n : nullptr;
        double* dwb = has_pow ? params_.w_b->grad.data() + co * n : nullptr;
        double dbr = 0.0, dbg = 0.0, dc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* wins = win_.data() + b * t_count * n;
            const double* rb = r_.data() + b * t_count * params_.c_out;
            const double* gb_cache = has_g ? g_.data() + b * t_count * params_.c_out : nullptr;
            const double* db = dout.data() + (b * params_.c_out + co) * t_count;
            for (std::size_t t = 0; t < t_count; ++t) {
                const double d = db[t];
                if (d == 0.0) continue;
                const double r = rb[t * params_.c_out + co];
                const double g = has_g ? gb_cache[t * params_.c_out + co] : 0.0;
                const Deriv dv = neuron_backward(params_.variant, r, g, d);
                const double* u = wins + t * n;
                vaxpy(dv.dr, u, dwr, n);
                dbr += dv.dr;
                if (has_g) {
                    vaxpy(dv.dg, u, dwg, n);
                    dbg += dv.dg;
                }
                if (has_pow) {
                    vaxpy_sq(dv.dpow, u, dwb, n);
                    dc += dv.dpow;
                }
            }
        }
        params_.b_r.grad[co] += dbr;
        if (has_g) params_.b_g->grad[co] += dbg;
        if (has_pow) params_.c->grad[co] += dc;
    });

    // Input gradients: independent per sample.
    Tensor dx({batch, params_.c_in, in_len_});
    parallel_for(batch, threads_, [&](std::size_t b) {
        const double* wins = win_.data() + b * t_count * n;
        const double* rb = r_.data() + b * t_count * params_.c_out;
        const double* gb_cache = has_g ? g_.data() + b * t_count * params_.c_out : nullptr;
        std::vector<double> acc_r(n), acc_b(n);
        for (std::size_t t = 0; t < t_count; ++t) {
            std::fill(acc_r.begin(), acc_r.end(), 0.0);
            if (has_pow) std::fill(acc_b.begin(), acc_b.end(), 0.0);
            bool any = false;
            for (std::size_t co = 0; co < params_.c_out; ++co) {
                const double d = dout.data()[(b * params_.c_out + co) * t_count + t];
                if (d == 0.0) continue;
                any = true;
                const double r = rb[t * params_.c_out + co];
                const double g = has_g ? gb_cache[t * params_.c_out + co] : 0.0;
                const Deriv dv = neuron_backward(params_.variant, r, g, d);
                if (has_g) {
                    vaxpy2(dv.dr, wr + co * n, dv.dg, wg + co * n, acc_r.data(), n);
                } else {
                    vaxpy(dv.dr, wr + co * n, acc_r.data(), n);
                }
                if (has_pow) vaxpy(dv.dpow, wb + co * n, acc_b.data(), n);
            }
            if (!any) continue;
            const double* u = wins + t * n;
            const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * stride_) -
                                         static_cast<std::ptrdiff_t>(pad_);
            for (std::size_t ci = 0; ci < params_.c_in; ++ci) {
                double* dst = dx.data() + (b * params_.c_in + ci) * in_len_;
                for (std::size_t k = 0; k < kernel; ++k) {
                    const std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(k);
                    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(in_len_)) continue;
                    const std::size_t idx = ci * kernel + k;
                    double contrib = acc_r[idx];
                    if (has_pow) contrib += 2.0 * u[idx] * acc_b[idx];
                    dst[pos] += contrib;
                }
            }
        }
    });
    return dx;
}

QuadraticDense::QuadraticDense(std::string name, NeuronVariant variant, std::size_t in_dim,
                               std::size_t units)
    : name_(std::move(name)), params_(name_, variant, units, 1, in_dim) {}

Tensor QuadraticDense::forward(const Tensor& x, Mode) {
    const std::size_t in_dim = params_.kernel;
    if (x.ndim() != 2 || x.extent(1) != in_dim) {
        throw std::invalid_argument(name_ + ": expected [B, " + std::to_string(in_dim) +
                                    "] input, got " + shape_to_string(x.shape()));
    }
    const std::size_t batch = x.extent(0);
    const std::size_t units = params_.c_out;
    const bool has_g = variant_has_g(params_.variant);
    const bool has_pow = variant_has_power(params_.variant);

    x_cache_ = x;
    r_cache_ = Tensor({batch, units});
    if (has_g) g_cache_ = Tensor({batch, units});

    const double* wr = params_.w_r.value.data();
    const double* br = params_.b_r.value.data();
    const double* wg = has_g ? params_.w_g->value.data() : nullptr;
    const double* bg = has_g ? params_.b_g->value.data() : nullptr;
    const double* wb = has_pow ? params_.w_b->value.data() : nullptr;
    const double* pc = has_pow ? params_.c->value.data() : nullptr;

    Tensor out({batch, units});
    parallel_for(batch, threads_, [&](std::size_t b) {
        const double* v = x.data() + b * in_dim;
        std::vector<double> vsq;
        if (has_pow) {
            vsq.resize(in_dim);
            for (std::size_t i = 0; i < in_dim; ++i) vsq[i] = v[i] * v[i];
        }
        for (std::size_t u = 0; u < units; ++u) {
            const double r = vdot(v, wr + u * in_dim, in_dim) + br[u];
            double g = 0.0, pow_term = 0.0;
            if (has_g) g = vdot(v, wg + u * in_dim, in_dim) + bg[u];
            if (has_pow) pow_term = vdot(vsq.data(), wb + u * in_dim, in_dim) + pc[u];
            r_cache_.at(b, u) = r;
            if (has_g) g_cache_.at(b, u) = g;
            out.at(b, u) = combine(params_.variant, r, g, pow_term);
        }
    });
    return out;
}

Tensor QuadraticDense::backward(const Tensor& dout) {
    const std::size_t in_dim = params_.kernel;
    const std::size_t batch = x_cache_.numel() ? x_cache_.extent(0) : 0;
    if (batch == 0 || dout.ndim() != 2 || dout.extent(0) != batch ||
        dout.extent(1) != params_.c_out) {
        throw std::invalid_argument(name_ + ": backward shape mismatch");
    }
    const std::size_t units = params_.c_out;
    const bool has_g = variant_has_g(params_.variant);
    const bool has_pow = variant_has_power(params_.variant);

    const double* wr = params_.w_r.value.data();
    const double* wg = has_g ? params_.w_g->value.data() : nullptr;
    const double* wb = has_pow ? params_.w_b->value.data() : nullptr;

    parallel_for(units, threads_, [&](std::size_t u) {
        double* dwr = params_.w_r.grad.data() + u * in_dim;
        double* dwg = has_g ? params_.w_g->grad.data() + u * in_dim : nullptr;
        double* dwb = has_pow ? params_.w_b->grad.data() + u * in_dim : nullptr;
        double dbr = 0.0, dbg = 0.0, dc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double d = dout.at(b, u);
            if (d == 0.0) continue;
            const double r = r_cache_.at(b, u);
            const double g = has_g ? g_cache_.at(b, u) : 0.0;
            const Deriv dv = neuron_backward(params_.variant, r, g, d);
            const double* v = x_cache_.data() + b * in_dim;
            vaxpy(dv.dr, v, dwr, in_dim);
            dbr += dv.dr;
            if (has_g) {
                vaxpy(dv.dg, v, dwg, in_dim);
                dbg += dv.dg;
            }
            if (has_pow) {
                for (std::size_t i = 0; i < in_dim; ++i) dwb[i] += dv.dpow * v[i] * v[i];
                dc += dv.dpow;
            }
        }
        params_.b_r.grad[u] += dbr;
        if (has_g) params_.b_g->grad[u] += dbg;
        if (has_pow) params_.c->grad[u] += dc;
    });

    Tensor dx({batch, in_dim});
    parallel_for(batch, threads_, [&](std::size_t b) {
        double* dst = dx.data() + b * in_dim;
        const double* v = x_cache_.data() + b * in_dim;
        for (std::size_t u = 0; u < units; ++u) {
            const double d = dout.at(b, u);
            if (d == 0.0) continue;
            const double r = r_cache_.at(b, u);
            const double g = has_g ? g_cache_.at(b, u) : 0.0;
            const Deriv dv = neuron_backward(params_.variant, r, g, d);
            vaxpy(dv.dr, wr + u * in_dim, dst, in_dim);
            if (has_g) vaxpy(dv.dg, wg + u * in_dim, dst, in_dim);
            if (has_pow) {
                const double* wbu = wb + u * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) dst[i] += dv.dpow * 2.0 * v[i] * wbu[i];
            }
        }
    });
    return dx;
}

Tensor Relu::forward(const Tensor& x, Mode) {
    x_cache_ = x;
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
    return out;
}

Tensor Relu::backward(const Tensor& dout) {
    if (!dout.same_shape(x_cache_)) {
        throw std::invalid_argument(name_ + ": backward shape mismatch");
    }
    Tensor dx(dout.shape());
    const double* pd = dout.data();
    const double* px = x_cache_.data();
    double* po = dx.data();
    for (std::size_t i = 0; i < dout.numel(); ++i) po[i] = px[i] > 0.0 ? pd[i] : 0.0;
    return dx;
}

Tensor MaxPool1d::forward(const Tensor& x, Mode) {
    if (x.ndim() != 3) {
        throw std::invalid_argument(name_ + ": expected [B, C, L] input, got " +
                                    shape_to_string(x.shape()));
    }
    const std::size_t batch = x.extent(0), chans = x.extent(1), len = x.extent(2);
    const std::size_t out_len = (len + 1) / 2;
    in_shape_ = x.shape();
    argmax_.assign(batch * chans * out_len, 0);

    Tensor out({batch, chans, out_len});
    parallel_for(batch, threads_, [&](std::size_t b) {
        for (std::size_t c = 0; c < chans; ++c) {
            const double* src = x.data() + (b * chans + c) * len;
            double* dst = out.data() + (b * chans + c) * out_len;
            std::size_t* arg = argmax_.data() + (b * chans + c) * out_len;
            for (std::size_t o = 0; o < out_len; ++o) {
                const std::size_t i0 = 2 * o;
                const std::size_t i1 = i0 + 1;
                if (i1 < len && src[i1] > src[i0]) {
                    dst[o] = src[i1];
                    arg[o] = i1;
                } else {
                    dst[o] = src[i0];
                    arg[o] = i0;
                }
            }
        }
    });
    return out;
}

Tensor MaxPool1d::backward(const Tensor& dout) {
    if (in_shape_.size() != 3) throw std::runtime_error(name_ + ": backward before forward");
    const std::size_t batch = in_shape_[0], chans = in_shape_[1], len = in_shape_[2];
    const std::size_t out_len = (len + 1) / 2;
    if (dout.ndim() != 3 || dout.extent(2) != out_len) {
        throw std::invalid_argument(name_ + ": backward shape mismatch");
    }
    Tensor dx(in_shape_);
    parallel_for(batch, threads_, [&](std::size_t b) {
        for (std::size_t c = 0; c < chans; ++c) {
            const double* pd = dout.data() + (b * chans + c) * out_len;
            double* dst = dx.data() + (b * chans + c) * len;
            const std::size_t* arg = argmax_.data() + (b * chans + c) * out_len;
            for (std::size_t o = 0; o < out_len; ++o) dst[arg[o]] += pd[o];
        }
    });
    return dx;
}

BatchNorm1d::BatchNorm1d(std::string name, std::size_t channels, double momentum, double eps)
    : name_(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(name_ + ".gamma", Tensor::full({channels}, 1.0), LrGroup::kRGroup),
      beta_(name_ + ".beta", Tensor({channels}), LrGroup::kRGroup),
      running_mean_(Tensor({channels})), running_var_(Tensor::full({channels}, 1.0)) {}

std::vector<std::pair<std::string, Tensor*>> BatchNorm1d::state() {
    return {{name_ + ".running_mean", &running_mean_}, {name_ + ".running_var", &running_var_}};
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode) {
    if (x.ndim() != 3 || x.extent(1) != channels_) {
        throw std::invalid_argument(name_ + ": expected [B, " + std::to_string(channels_) +
                                    ", L] input, got " + shape_to_string(x.shape()));
    }
    const std::size_t batch = x.extent(0), len = x.extent(2);
    Tensor out(x.shape());

    if (mode == Mode::kEval) {
        train_cached_ = false;
        parallel_for(channels_, threads_, [&](std::size_t c) {
            const double inv = 1.0 / std::sqrt(running_var_[c] + eps_);
            const double g = gamma_.value[c], bt = beta_.value[c], mu = running_mean_[c];
            for (std::size_t b = 0; b < batch; ++b) {
                const double* src = x.data() + (b * channels_ + c) * len;
                double* dst = out.data() + (b * channels_ + c) * len;
                for (std::size_t i = 0; i < len; ++i) dst[i] = g * (src[i] - mu) * inv + bt;
            }
        });
        return out;
    }

    if (batch < 2) {
        throw std::invalid_argument(name_ + ": batchnorm requires batch size >= 2 in training "
                                            "mode, got " + std::to_string(batch));
    }
    const double n = static_cast<double>(batch * len);
    xhat_cache_ = Tensor(x.shape());
    inv_std_.assign(channels_, 0.0);
    train_cached_ = true;

    parallel_for(channels_, threads_, [&](std::size_t c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = x.data() + (b * channels_ + c) * len;
            for (std::size_t i = 0; i < len; ++i) sum += src[i];
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = x.data() + (b * channels_ + c) * len;
            for (std::size_t i = 0; i < len; ++i) {
                const double d = src[i] - mean;
                sq += d * d;
            }
        }
        const double var = sq / n;
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        const double g = gamma_.value[c], bt = beta_.value[c];
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = x.data() + (b * channels_ + c) * len;
            double* xh = xhat_cache_.data() + (b * channels_ + c) * len;
            double* dst = out.data() + (b * channels_ + c) * len;
            for (std::size_t i = 0; i < len; ++i) {
                xh[i] = (src[i] - mean) * inv;
                dst[i] = g * xh[i] + bt;
            }
        }
        running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * var;
    });
    return out;
}

Tensor BatchNorm1d::backward(const Tensor& dout) {
    if (!train_cached_) {
        throw std::runtime_error(name_ + ": backward requires a TRAIN-mode forward");
    }
    if (!dout.same_shape(xhat_cache_)) {
        throw std::invalid_argument(name_ + ": backward shape mismatch");
    }
    const std::size_t batch = dout.extent(0), len = dout.extent(2);
    const double n = static_cast<double>(batch * len);
    Tensor dx(dout.shape());

    parallel_for(channels_, threads_, [&](std::size_t c) {
        double dbeta = 0.0, dgamma = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* pd = dout.data() + (b * channels_ + c) * len;
            const double* xh = xhat_cache_.data() + (b * channels_ + c) * len;
            for (std::size_t i = 0; i < len; ++i) {
                dbeta += pd[i];
                dgamma += pd[i] * xh[i];
            }
        }
        gamma_.grad[c] += dgamma;
        beta_.grad[c] += dbeta;

        const double g = gamma_.value[c];
        const double inv = inv_std_[c];
        // dx = gamma*inv/n * (n*dout - sum(dout) - xhat*sum(dout*xhat))
        for (std::size_t b = 0; b < batch; ++b) {
            const double* pd = dout.data() + (b * channels_ + c) * len;
            const double* xh = xhat_cache_.data() + (b * channels_ + c) * len;
            double* dst = dx.data() + (b * channels_ + c) * len;
            for (std::size_t i = 0; i < len; ++i) {
                dst[i] = g * inv / n * (n * pd[i] - dbeta - xh[i] * dgamma);
            }
        }
    });
    return dx;
}

Tensor Flatten::forward(const Tensor& x, Mode) {
    if (x.ndim() != 3) {
        throw std::invalid_argument(name_ + ": expected [B, C, L] input, got " +
                                    shape_to_string(x.shape()));
    }
    in_shape_ = x.shape();
    return x.reshaped({x.extent(0), x.extent(1) * x.extent(2)});
}

Tensor Flatten::backward(const Tensor& dout) {
    if (in_shape_.size() != 3) throw std::runtime_error(name_ + ": backward before forward");
    return dout.reshaped(in_shape_);
}

}  // namespace qdiag
