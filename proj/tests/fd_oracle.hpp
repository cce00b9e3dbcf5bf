#pragma once

// Test-only finite-difference oracles. Nothing here calls into the closed-form
// derivative code; every value is built from se_kernel evaluations alone.

#include "pigp/kernels.hpp"

#include <array>
#include <cmath>

namespace pigp::oracle {

namespace detail {

// Second-order central stencils for d/dx and d²/dx² (weights, unscaled by h).
inline constexpr std::array<long double, 3> kFirst{-0.5L, 0.0L, 0.5L};
inline constexpr std::array<long double, 3> kSecond{1.0L, -2.0L, 1.0L};

inline long double se_long(long double t, long double tp, const KernelParams& p) {
    const long double tau = t - tp;
    const long double s = p.sigma_s, l = p.ell;
    return s * s * std::exp(-0.5L * tau * tau / (l * l));
}

inline const std::array<long double, 3>* stencil(int order) {
    static constexpr std::array<long double, 3> identity{0.0L, 1.0L, 0.0L};
    switch (order) {
        case 0: return &identity;
        case 1: return &kFirst;
        case 2: return &kSecond;
        default: return nullptr;
    }
}

// Tensor-product central difference in (t, t') with step h; error is a series
// in even powers of h.
inline long double mixed_fd(double t, double tp, const KernelParams& p, int a, int b, long double h) {
    const auto* sa = stencil(a);
    const auto* sb = stencil(b);
    long double acc = 0.0L;
    for (int i = -1; i <= 1; ++i) {
        const long double wi = (*sa)[static_cast<std::size_t>(i + 1)];
        if (wi == 0.0L) continue;
        for (int j = -1; j <= 1; ++j) {
            const long double wj = (*sb)[static_cast<std::size_t>(j + 1)];
            if (wj == 0.0L) continue;
            acc += wi * wj * se_long(t + i * h, tp + j * h, p);
        }
    }
    return acc / std::pow(h, a + b);
}

}  // namespace detail

/// d^(a+b) k_se / dt^a dt'^b by central differences with two levels of
/// Richardson extrapolation (O(h^6)), evaluated in extended precision.
inline double se_mixed_fd(double t, double tp, const KernelParams& p, int a, int b) {
    const long double h = 0.02L * p.ell;
    const long double d1 = detail::mixed_fd(t, tp, p, a, b, h);
    const long double d2 = detail::mixed_fd(t, tp, p, a, b, h / 2);
    const long double d4 = detail::mixed_fd(t, tp, p, a, b, h / 4);
    const long double r1 = (4.0L * d2 - d1) / 3.0L;
    const long double r2 = (4.0L * d4 - d2) / 3.0L;
    return static_cast<double>((16.0L * r2 - r1) / 15.0L);
}

/// Channel covariance assembled from finite-difference derivatives of the SE kernel.
inline double cross_kernel_fd(Channel a, Channel b, double t, double tp, const KernelParams& p,
                              const OdeOperator& op) {
    auto weights = [&](Channel ch) -> std::array<double, 3> {
        switch (ch) {
            case Channel::displacement: return {1, 0, 0};
            case Channel::velocity: return {0, 1, 0};
            case Channel::acceleration: return {0, 0, 1};
            case Channel::force: return {op.stiffness, op.damping, op.mass};
        }
        return {0, 0, 0};
    };
    const auto wa = weights(a), wb = weights(b);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (wa[static_cast<std::size_t>(i)] != 0.0 && wb[static_cast<std::size_t>(j)] != 0.0)
                acc += wa[static_cast<std::size_t>(i)] * wb[static_cast<std::size_t>(j)] * se_mixed_fd(t, tp, p, i, j);
    return acc;
}

/// Relative error with the denominator floored at `floor_scale`, so that
/// points where the exact value crosses zero do not dominate.
inline double rel_err(double got, double want, double floor_scale) {
    return std::abs(got - want) / std::max(std::abs(want), floor_scale);
}

}  // namespace pigp::oracle
