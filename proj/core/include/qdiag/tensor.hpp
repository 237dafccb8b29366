// Dense row-major double tensors, the seeded RNG, sliding-window unfolding
// and the finite-difference gradient harness shared by every layer here.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace qdiag {

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor values(std::initializer_list<double> v);  // 1-D literal

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Row-major element access for the common ranks.
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;

    std::span<double> row(std::size_t i);              // 2-D: row i
    std::span<const double> row(std::size_t i) const;

    Tensor reshaped(std::vector<std::size_t> new_shape) const;
    void fill(double value);
    bool all_finite() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Elementwise product; shapes must match exactly (no broadcasting).
Tensor hadamard(const Tensor& a, const Tensor& b);

double dot(std::span<const double> a, std::span<const double> b);

// Deterministic, portable RNG: a splitmix64 stream with Box-Muller normals.
// The same seed produces the same sequence on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal
    std::size_t index(std::size_t n);       // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream for (seed, key) pairs, used for per-sample noise.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

private:
    std::uint64_t state_;
};

Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);

// Sliding windows of a [C, L] signal, flattened row-major to [num_windows, C*K].
// spans[w] is the half-open index range window w covers in the unpadded
// timeline, clipped to [0, L); padding positions read as zero.
struct Unfolded {
    Tensor windows;
    std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> spans;
    std::size_t num_windows = 0;
    std::size_t channels = 0;
    std::size_t kernel_len = 0;
    std::size_t stride = 0;
    std::size_t pad = 0;
    std::size_t input_len = 0;
};

Unfolded unfold(const Tensor& signal, std::size_t kernel_len, std::size_t stride, std::size_t pad);

std::size_t conv_output_len(std::size_t input_len, std::size_t kernel_len,
                            std::size_t stride, std::size_t pad);

// Compares an analytic gradient of a scalar function against central finite
// differences, coordinate by coordinate. Returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-12). Throws on non-finite values.
double check_gradient(const std::function<double(const Tensor&)>& f,
                      const std::function<Tensor(const Tensor&)>& analytic_grad,
                      const Tensor& x, double eps);

enum class LrGroup { kRGroup, kGbGroup };

// A trainable tensor. Gradients accumulate into `grad` and are zeroed by the
// optimizer after each step. The learning-rate group is fixed at construction.
class Parameter {
public:
    Parameter(std::string name, Tensor value, LrGroup group)
        : value(std::move(value)), grad(Tensor::zeros(this->value.shape())),
          name_(std::move(name)), lr_group_(group) {}

    Tensor value;
    Tensor grad;

    const std::string& name() const { return name_; }
    LrGroup lr_group() const { return lr_group_; }
    void zero_grad() { grad.fill(0.0); }

private:
    std::string name_;
    LrGroup lr_group_;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Writes from distinct
// indices must not alias; any cross-index reduction happens in the caller, in
// index order, so results do not depend on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int hardware_threads();

}  // namespace qdiag
