#pragma once

#include <string_view>

namespace pigp {

/// Squared-exponential kernel hyperparameters. Both must be positive.
struct KernelParams {
    double sigma_s = 1.0;  ///< signal standard deviation (response units)
    double ell = 1.0;      ///< length scale [s]

    void validate() const;
};

/// One structural mode: m z'' + 2 m zeta omega_n z' + m omega_n^2 z = F.
struct OscillatorParams {
    double m = 1.0;        ///< modal mass
    double zeta = 0.0;     ///< damping ratio, in [0, 1)
    double omega_n = 1.0;  ///< circular natural frequency [rad/s]

    [[nodiscard]] double damping() const { return 2.0 * m * zeta * omega_n; }
    [[nodiscard]] double stiffness() const { return m * omega_n * omega_n; }
    void validate() const;
};

/// Coefficients of the linear operator L = mass d²/dt² + damping d/dt + stiffness
/// that maps the latent displacement onto the force channel.
struct OdeOperator {
    double mass = 1.0;
    double damping = 0.0;
    double stiffness = 0.0;

    static OdeOperator from(const OscillatorParams& osc) {
        return {osc.m, osc.damping(), osc.stiffness()};
    }
};

enum class Channel { displacement = 0, velocity = 1, acceleration = 2, force = 3 };

std::string_view to_string(Channel ch);
Channel channel_from_string(std::string_view name);

/// sigma_s² exp(-(t - t')² / (2 ell²)).
double se_kernel(double t, double t_prime, const KernelParams& params);

/// d^(a+b) k / dt^a dt'^b for a, b in {0, 1, 2}, with tau = t - t' so that
/// d/dt = +d/dtau and d/dt' = -d/dtau. Throws std::domain_error otherwise.
double se_kernel_mixed_deriv(double t, double t_prime, const KernelParams& params, int order_t,
                             int order_t_prime);

/// Covariance between channel `a` observed at t and channel `b` observed at t'.
/// Derivative channels map to mixed derivatives; the force channel applies the
/// oscillator operator in its own time argument.
double cross_kernel(Channel a, Channel b, double t, double t_prime, const KernelParams& params,
                    const OdeOperator& op);

inline double cross_kernel(Channel a, Channel b, double t, double t_prime, const KernelParams& params,
                           const OscillatorParams& osc) {
    return cross_kernel(a, b, t, t_prime, params, OdeOperator::from(osc));
}

/// Cross-kernel value together with its derivative with respect to log(ell).
/// The derivative with respect to log(sigma_s) is simply 2 * value.
struct KernelValueGrad {
    double value;
    double d_log_ell;
};

KernelValueGrad cross_kernel_with_grad(Channel a, Channel b, double t, double t_prime,
                                       const KernelParams& params, const OdeOperator& op);

}  // namespace pigp
