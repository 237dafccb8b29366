#include "qdiag/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qdiag {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e < 1) {
            throw std::invalid_argument("tensor extents must be >= 1, got shape " +
                                        shape_to_string(shape));
        }
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::values(std::initializer_list<double> v) {
    if (v.size() == 0) throw std::invalid_argument("tensor extents must be >= 1");
    return Tensor({v.size()}, std::vector<double>(v));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " +
                                    shape_to_string(shape_));
    }
    return shape_[axis];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

std::span<double> Tensor::row(std::size_t i) {
    return std::span<double>(data_.data() + i * shape_[1], shape_[1]);
}

std::span<const double> Tensor::row(std::size_t i) const {
    return std::span<const double>(data_.data() + i * shape_[1], shape_[1]);
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_numel(new_shape) != data_.size()) {
        throw std::invalid_argument("cannot reshape " + shape_to_string(shape_) + " to " +
                                    shape_to_string(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("hadamard shape mismatch: " + shape_to_string(a.shape()) +
                                    " vs " + shape_to_string(b.shape()));
    }
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot length mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::uint64_t Rng::next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014)
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index on empty range");
    // Rejection sampling keeps the distribution exactly uniform.
    std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= bound && bound != 0);
    return static_cast<std::size_t>(r % n);
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t key) {
    Rng mix(seed ^ (key * 0x9e3779b97f4a7c15ULL + 0x853c49e6748fea9bULL));
    return mix.next_u64();
}

Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
    return t;
}

std::size_t conv_output_len(std::size_t input_len, std::size_t kernel_len,
                            std::size_t stride, std::size_t pad) {
    if (kernel_len < 1 || stride < 1) {
        throw std::invalid_argument("kernel_len and stride must be >= 1");
    }
    if (input_len + 2 * pad < kernel_len) {
        throw std::invalid_argument("signal of length " + std::to_string(input_len) + " with pad " +
                                    std::to_string(pad) + " is shorter than kernel " +
                                    std::to_string(kernel_len));
    }
    return (input_len + 2 * pad - kernel_len) / stride + 1;
}

Unfolded unfold(const Tensor& signal, std::size_t kernel_len, std::size_t stride, std::size_t pad) {
    if (signal.ndim() != 2) {
        throw std::invalid_argument("unfold expects a [C, L] signal, got shape " +
                                    shape_to_string(signal.shape()));
    }
    const std::size_t channels = signal.extent(0);
    const std::size_t len = signal.extent(1);
    const std::size_t num_windows = conv_output_len(len, kernel_len, stride, pad);

    Unfolded out;
    out.num_windows = num_windows;
    out.channels = channels;
    out.kernel_len = kernel_len;
    out.stride = stride;
    out.pad = pad;
    out.input_len = len;
    out.windows = Tensor({num_windows, channels * kernel_len});
    out.spans.resize(num_windows);

    for (std::size_t w = 0; w < num_windows; ++w) {
        const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(w * stride) -
                                     static_cast<std::ptrdiff_t>(pad);
        const std::ptrdiff_t stop = start + static_cast<std::ptrdiff_t>(kernel_len);
        out.spans[w] = {std::max<std::ptrdiff_t>(start, 0),
                        std::min<std::ptrdiff_t>(stop, static_cast<std::ptrdiff_t>(len))};
        double* dst = out.windows.data() + w * channels * kernel_len;
        for (std::size_t c = 0; c < channels; ++c) {
            const double* src = signal.data() + c * len;
            for (std::size_t k = 0; k < kernel_len; ++k) {
                const std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(k);
                dst[c * kernel_len + k] =
                    (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) ? src[pos] : 0.0;
            }
        }
    }
    return out;
}

double check_gradient(const std::function<double(const Tensor&)>& f,
                      const std::function<Tensor(const Tensor&)>& analytic_grad,
                      const Tensor& x, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) {
        throw std::invalid_argument("check_gradient eps must be in (0, 1e-2]");
    }
    Tensor grad = analytic_grad(x);
    if (!grad.same_shape(x)) {
        throw std::invalid_argument("analytic gradient shape " + shape_to_string(grad.shape()) +
                                    " does not match input " + shape_to_string(x.shape()));
    }
    if (!x.all_finite() || !grad.all_finite()) {
        throw std::runtime_error("check_gradient: non-finite input or analytic gradient");
    }

    Tensor probe = x;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(probe);
        probe[i] = orig - eps;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("check_gradient: non-finite function value at coordinate " +
                                     std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-12});
        max_rel = std::max(max_rel, std::abs(grad[i] - numeric) / denom);
    }
    return max_rel;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace qdiag
