// SIMD kernels for the conv/dense hot paths, written with GCC vector
// extensions so the accumulation order is fixed by source. Every variant
// shares these bodies, which keeps the r-branch arithmetic bit-identical
// between quadratic and conventional layers.

#pragma once

#include <cstddef>
#include <cstring>

namespace qdiag::detail {

typedef double v4 __attribute__((vector_size(32)));

inline v4 vzero() { return v4{0.0, 0.0, 0.0, 0.0}; }

inline v4 loadu(const double* p) {
    v4 v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

inline void storeu(double* p, v4 v) { std::memcpy(p, &v, sizeof(v)); }

inline double hsum(v4 v) { return (v[0] + v[1]) + (v[2] + v[3]); }

inline double vdot(const double* a, const double* b, std::size_t n) {
    v4 acc0 = vzero(), acc1 = vzero();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 += loadu(a + i) * loadu(b + i);
        acc1 += loadu(a + i + 4) * loadu(b + i + 4);
    }
    if (i + 4 <= n) {
        acc0 += loadu(a + i) * loadu(b + i);
        i += 4;
    }
    double s = hsum(acc0 + acc1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

struct Dot3 {
    double r = 0.0, g = 0.0, p = 0.0;
};

// One pass over the window u: r = u.wr, g = u.wg, p = (u*u).wb. The unused
// branches are compiled out; the r chain is the same arithmetic in every
// instantiation.
template <bool kHasG, bool kHasPow>
inline Dot3 vdot3(const double* u, const double* wr, const double* wg, const double* wb,
                  std::size_t n) {
    v4 r0 = vzero(), r1 = vzero(), g0 = vzero(), g1 = vzero(), p0 = vzero(), p1 = vzero();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const v4 ua = loadu(u + i), ub = loadu(u + i + 4);
        r0 += ua * loadu(wr + i);
        r1 += ub * loadu(wr + i + 4);
        if constexpr (kHasG) {
            g0 += ua * loadu(wg + i);
            g1 += ub * loadu(wg + i + 4);
        }
        if constexpr (kHasPow) {
            p0 += (ua * ua) * loadu(wb + i);
            p1 += (ub * ub) * loadu(wb + i + 4);
        }
    }
    if (i + 4 <= n) {
        const v4 ua = loadu(u + i);
        r0 += ua * loadu(wr + i);
        if constexpr (kHasG) g0 += ua * loadu(wg + i);
        if constexpr (kHasPow) p0 += (ua * ua) * loadu(wb + i);
        i += 4;
    }
    Dot3 out;
    out.r = hsum(r0 + r1);
    if constexpr (kHasG) out.g = hsum(g0 + g1);
    if constexpr (kHasPow) out.p = hsum(p0 + p1);
    for (; i < n; ++i) {
        out.r += u[i] * wr[i];
        if constexpr (kHasG) out.g += u[i] * wg[i];
        if constexpr (kHasPow) out.p += u[i] * u[i] * wb[i];
    }
    return out;
}

inline void vaxpy(double alpha, const double* x, double* y, std::size_t n) {
    const v4 a = {alpha, alpha, alpha, alpha};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) storeu(y + i, loadu(y + i) + a * loadu(x + i));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// y += alpha * x*x
inline void vaxpy_sq(double alpha, const double* x, double* y, std::size_t n) {
    const v4 a = {alpha, alpha, alpha, alpha};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const v4 xv = loadu(x + i);
        storeu(y + i, loadu(y + i) + a * (xv * xv));
    }
    for (; i < n; ++i) y[i] += alpha * x[i] * x[i];
}

// y += alpha * x1 + beta * x2
inline void vaxpy2(double alpha, const double* x1, double beta, const double* x2, double* y,
                   std::size_t n) {
    const v4 a = {alpha, alpha, alpha, alpha};
    const v4 b = {beta, beta, beta, beta};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        storeu(y + i, loadu(y + i) + a * loadu(x1 + i) + b * loadu(x2 + i));
    }
    for (; i < n; ++i) y[i] += alpha * x1[i] + beta * x2[i];
}

}  // namespace qdiag::detail
