#include "pigp/kernels.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pigp {

void KernelParams::validate() const {
    if (!(sigma_s > 0.0) || !(ell > 0.0) || !std::isfinite(sigma_s) || !std::isfinite(ell))
        throw std::domain_error("KernelParams: sigma_s and ell must be positive and finite");
}

void OscillatorParams::validate() const {
    if (!(m > 0.0) || !(omega_n > 0.0) || !(zeta >= 0.0 && zeta < 1.0))
        throw std::domain_error("OscillatorParams: need m > 0, omega_n > 0, 0 <= zeta < 1");
}

std::string_view to_string(Channel ch) {
    switch (ch) {
        case Channel::displacement: return "displacement";
        case Channel::velocity: return "velocity";
        case Channel::acceleration: return "acceleration";
        case Channel::force: return "force";
    }
    return "unknown";
}

Channel channel_from_string(std::string_view name) {
    if (name == "displacement" || name == "z") return Channel::displacement;
    if (name == "velocity" || name == "zdot") return Channel::velocity;
    if (name == "acceleration" || name == "zddot") return Channel::acceleration;
    if (name == "force" || name == "F") return Channel::force;
    throw std::invalid_argument("unknown channel '" + std::string(name) + "'");
}

namespace {

// Gaussian derivatives factor as d^n/dtau^n exp(-u²/2) = (-1/ell)^n He_n(u) exp(-u²/2),
// u = tau/ell, with He_n the probabilists' Hermite polynomials. Orders up to 4
// appear in the kernel, order 5 in its log(ell) derivative.
struct GaussianTerms {
    std::array<double, 6> hermite{};
    std::array<double, 5> inv_ell_pow{};
    double u = 0.0;
    double envelope = 0.0;  // sigma_s² exp(-u²/2)

    GaussianTerms(double tau, const KernelParams& p) {
        u = tau / p.ell;
        envelope = p.sigma_s * p.sigma_s * std::exp(-0.5 * u * u);
        hermite[0] = 1.0;
        hermite[1] = u;
        for (int n = 1; n < 5; ++n) hermite[n + 1] = u * hermite[n] - n * hermite[n - 1];
        inv_ell_pow[0] = 1.0;
        for (int n = 1; n < 5; ++n) inv_ell_pow[n] = inv_ell_pow[n - 1] / p.ell;
    }

    // d^(a+b) k / dt^a dt'^b = (-1)^a ell^-n He_n(u) sigma² e^{-u²/2}
    [[nodiscard]] double mixed(int a, int b) const {
        const int n = a + b;
        const double sign = (a % 2 == 0) ? 1.0 : -1.0;
        return sign * inv_ell_pow[n] * hermite[n] * envelope;
    }

    [[nodiscard]] double mixed_d_log_ell(int a, int b) const {
        const int n = a + b;
        const double sign = (a % 2 == 0) ? 1.0 : -1.0;
        return sign * inv_ell_pow[n] * envelope * (u * hermite[n + 1] - n * hermite[n]);
    }
};

// Channel as a weighted sum of derivative orders 0..2.
std::array<double, 3> operator_weights(Channel ch, const OdeOperator& op) {
    switch (ch) {
        case Channel::displacement: return {1.0, 0.0, 0.0};
        case Channel::velocity: return {0.0, 1.0, 0.0};
        case Channel::acceleration: return {0.0, 0.0, 1.0};
        case Channel::force: return {op.stiffness, op.damping, op.mass};
    }
    throw std::invalid_argument("invalid channel");
}

template <typename Term>
double combine(Channel a, Channel b, const OdeOperator& op, Term&& term) {
    const auto wa = operator_weights(a, op);
    const auto wb = operator_weights(b, op);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (wa[i] == 0.0) continue;
        for (int j = 0; j < 3; ++j) {
            if (wb[j] == 0.0) continue;
            acc += wa[i] * wb[j] * term(i, j);
        }
    }
    return acc;
}

}  // namespace

double se_kernel(double t, double t_prime, const KernelParams& params) {
    const double tau = t - t_prime;
    return params.sigma_s * params.sigma_s * std::exp(-0.5 * tau * tau / (params.ell * params.ell));
}

double se_kernel_mixed_deriv(double t, double t_prime, const KernelParams& params, int order_t,
                             int order_t_prime) {
    if (order_t < 0 || order_t > 2 || order_t_prime < 0 || order_t_prime > 2)
        throw std::domain_error("se_kernel_mixed_deriv: derivative orders must be in {0,1,2}");
    return GaussianTerms(t - t_prime, params).mixed(order_t, order_t_prime);
}

double cross_kernel(Channel a, Channel b, double t, double t_prime, const KernelParams& params,
                    const OdeOperator& op) {
    const GaussianTerms g(t - t_prime, params);
    return combine(a, b, op, [&](int i, int j) { return g.mixed(i, j); });
}

KernelValueGrad cross_kernel_with_grad(Channel a, Channel b, double t, double t_prime,
                                       const KernelParams& params, const OdeOperator& op) {
    const GaussianTerms g(t - t_prime, params);
    return {combine(a, b, op, [&](int i, int j) { return g.mixed(i, j); }),
            combine(a, b, op, [&](int i, int j) { return g.mixed_d_log_ell(i, j); })};
}

}  // namespace pigp
