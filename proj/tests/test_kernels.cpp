#include "pigp/kernels.hpp"

#include "fd_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace pigp;

namespace {

constexpr Channel kAll[] = {Channel::displacement, Channel::velocity, Channel::acceleration, Channel::force};

int order_of(Channel ch) { return ch == Channel::force ? 2 : static_cast<int>(ch); }

}  // namespace

TEST_CASE("se_kernel closed-form values") {
    CHECK(se_kernel(5.0, 5.0, {2.0, 1.0}) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(se_kernel(1.0, 0.0, {1.0, 1.0}) == doctest::Approx(0.6065306597126334).epsilon(1e-14));
    CHECK(se_kernel(0.0, 3.0, {1.0, 1.0}) == se_kernel(3.0, 0.0, {1.0, 1.0}));
    // maximal at zero lag
    CHECK(se_kernel(0.0, 0.0, {1.3, 0.7}) > se_kernel(0.0, 0.01, {1.3, 0.7}));
}

TEST_CASE("se_kernel_mixed_deriv spot values") {
    const KernelParams p{1.0, 2.0};
    CHECK(se_kernel_mixed_deriv(3.0, 3.0, p, 1, 0) == 0.0);
    CHECK(se_kernel_mixed_deriv(3.0, 3.0, p, 0, 1) == 0.0);

    // Plain central difference with h = 1e-4 gives 0.25 at zero lag for ell = 2.
    const double h = 1e-4;
    const double fd = (se_kernel(h, h, p) - se_kernel(h, -h, p) - se_kernel(-h, h, p) + se_kernel(-h, -h, p)) /
                      (4.0 * h * h);
    CHECK(fd == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(se_kernel_mixed_deriv(0.0, 0.0, p, 1, 1) == doctest::Approx(0.25).epsilon(1e-14));

    // Order (2,2) at tau = 1: He_4(1) exp(-1/2) = -2 exp(-1/2).
    const KernelParams unit{1.0, 1.0};
    const double value = se_kernel_mixed_deriv(1.0, 0.0, unit, 2, 2);
    CHECK(value == doctest::Approx(-2.0 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(oracle::rel_err(value, oracle::se_mixed_fd(1.0, 0.0, unit, 2, 2), 1e-3) <= 1e-6);
}

TEST_CASE("se_kernel_mixed_deriv rejects invalid orders") {
    const KernelParams p{1.0, 1.0};
    CHECK_THROWS_AS(se_kernel_mixed_deriv(0.0, 0.0, p, 3, 0), std::domain_error);
    CHECK_THROWS_AS(se_kernel_mixed_deriv(0.0, 0.0, p, 0, -1), std::domain_error);
}

TEST_CASE("zero-lag variances of derivative channels") {
    const KernelParams p{1.7, 0.6};
    const double s2 = p.sigma_s * p.sigma_s, l2 = p.ell * p.ell;
    CHECK(se_kernel_mixed_deriv(0, 0, p, 0, 0) == doctest::Approx(s2));
    CHECK(se_kernel_mixed_deriv(0, 0, p, 1, 1) == doctest::Approx(s2 / l2));
    CHECK(se_kernel_mixed_deriv(0, 0, p, 2, 2) == doctest::Approx(3.0 * s2 / (l2 * l2)));
    CHECK(oracle::rel_err(se_kernel_mixed_deriv(0, 0, p, 2, 2), oracle::se_mixed_fd(0, 0, p, 2, 2), 1e-3) <= 1e-6);
}

TEST_CASE("every mixed derivative matches finite differences on [-5 ell, 5 ell]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> log_u(std::log(0.2), std::log(5.0));
    for (int trial = 0; trial < 5; ++trial) {
        const KernelParams p{std::exp(log_u(rng)), std::exp(log_u(rng))};
        for (int a = 0; a <= 2; ++a) {
            for (int b = 0; b <= 2; ++b) {
                const double scale = p.sigma_s * p.sigma_s / std::pow(p.ell, a + b);
                double worst = 0.0;
                for (int k = 0; k < 51; ++k) {
                    const double tau = -5.0 * p.ell + 10.0 * p.ell * k / 50.0;
                    const double got = se_kernel_mixed_deriv(1.0 + tau, 1.0, p, a, b);
                    const double want = oracle::se_mixed_fd(1.0 + tau, 1.0, p, a, b);
                    worst = std::max(worst, oracle::rel_err(got, want, 1e-3 * scale));
                }
                INFO("orders " << a << "," << b);
                CHECK(worst <= 1e-6);
            }
        }
    }
}

TEST_CASE("cross_kernel examples") {
    const KernelParams unit{1.0, 1.0};
    const OscillatorParams osc{1.0, 0.0, 1.0};
    // k_s sigma² + m d²k/dt² at zero lag = 1 - 1
    CHECK(std::abs(cross_kernel(Channel::force, Channel::displacement, 0.0, 0.0, unit, osc)) < 1e-15);

    const KernelParams p{1.3, 0.8};
    const OdeOperator pure_inertia{1.0, 0.0, 0.0};
    const double kff = cross_kernel(Channel::force, Channel::force, 2.0, 2.0, p, pure_inertia);
    CHECK(kff == doctest::Approx(3.0 * 1.69 / std::pow(0.8, 4)).epsilon(1e-13));
    CHECK(oracle::rel_err(kff, oracle::cross_kernel_fd(Channel::force, Channel::force, 2.0, 2.0, p, pure_inertia),
                          1e-3) <= 1e-6);

    for (double tau : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
        CHECK(cross_kernel(Channel::displacement, Channel::velocity, tau, 0.0, p, osc) ==
              doctest::Approx(-cross_kernel(Channel::velocity, Channel::displacement, tau, 0.0, p, osc)));
    }
}

TEST_CASE("cross_kernel is symmetric under swapping channels and times") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    const KernelParams p{0.9, 1.4};
    const OscillatorParams osc{2.0, 0.03, 1.1};
    for (int k = 0; k < 40; ++k) {
        const double t = u(rng), tp = u(rng);
        for (Channel a : kAll)
            for (Channel b : kAll) {
                const double ab = cross_kernel(a, b, t, tp, p, osc);
                const double ba = cross_kernel(b, a, tp, t, p, osc);
                CHECK(ab == doctest::Approx(ba).epsilon(1e-13));
            }
    }
}

TEST_CASE("force-force kernel equals term-by-term expansion for an undamped oscillator") {
    const KernelParams p{1.1, 0.9};
    const OscillatorParams osc{1.0, 0.0, 1.7};
    const double ks = osc.stiffness();
    for (double tau = -4.0; tau <= 4.0; tau += 0.25) {
        const double direct = ks * ks * se_kernel_mixed_deriv(tau, 0, p, 0, 0) +
                              ks * (se_kernel_mixed_deriv(tau, 0, p, 2, 0) + se_kernel_mixed_deriv(tau, 0, p, 0, 2)) +
                              se_kernel_mixed_deriv(tau, 0, p, 2, 2);
        const double composed = cross_kernel(Channel::force, Channel::force, tau, 0.0, p, osc);
        CHECK(oracle::rel_err(composed, direct, 1e-12 * ks * ks) <= 1e-12);
    }
}

TEST_CASE("cross_kernel matches finite differences for every channel pair") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> log_u(std::log(0.3), std::log(3.0));
    for (int trial = 0; trial < 3; ++trial) {
        const KernelParams p{std::exp(log_u(rng)), std::exp(log_u(rng))};
        const OscillatorParams osc{std::exp(log_u(rng)), 0.02 * (trial + 1), std::exp(log_u(rng))};
        const auto op = OdeOperator::from(osc);
        for (Channel a : kAll)
            for (Channel b : kAll) {
                const double scale = 1e-3 * p.sigma_s * p.sigma_s *
                                     std::max(1.0, op.stiffness) * std::max(1.0, op.stiffness) /
                                     std::pow(std::min(1.0, p.ell), order_of(a) + order_of(b));
                for (int k = 0; k < 51; ++k) {
                    const double tau = -5.0 * p.ell + 10.0 * p.ell * k / 50.0;
                    const double got = cross_kernel(a, b, tau, 0.0, p, op);
                    const double want = oracle::cross_kernel_fd(a, b, tau, 0.0, p, op);
                    CHECK(oracle::rel_err(got, want, scale) <= 1e-6);
                }
            }
    }
}

TEST_CASE("log-length-scale derivative matches finite differences") {
    const KernelParams p{1.2, 0.7};
    const OdeOperator op{1.5, 0.1, 2.0};
    const double h = 1e-6;
    for (Channel a : kAll)
        for (Channel b : kAll)
            for (double tau : {-2.1, -0.4, 0.0, 0.9, 3.0}) {
                const double up = cross_kernel(a, b, tau, 0.0, {p.sigma_s, p.ell * std::exp(h)}, op);
                const double dn = cross_kernel(a, b, tau, 0.0, {p.sigma_s, p.ell * std::exp(-h)}, op);
                const double fd = (up - dn) / (2.0 * h);
                const auto kv = cross_kernel_with_grad(a, b, tau, 0.0, p, op);
                CHECK(kv.value == doctest::Approx(cross_kernel(a, b, tau, 0.0, p, op)));
                CHECK(kv.d_log_ell == doctest::Approx(fd).epsilon(1e-6).scale(1e-3 * std::abs(up) + 1e-6));
            }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((KernelParams{0.0, 1.0}.validate()), std::domain_error);
    CHECK_THROWS_AS((KernelParams{1.0, -1.0}.validate()), std::domain_error);
    CHECK_THROWS_AS((OscillatorParams{1.0, 1.0, 1.0}.validate()), std::domain_error);
    CHECK_THROWS_AS((OscillatorParams{1.0, 0.1, 0.0}.validate()), std::domain_error);
    const OscillatorParams osc{2.0, 0.05, 3.0};
    CHECK(osc.damping() == doctest::Approx(0.6));
    CHECK(osc.stiffness() == doctest::Approx(18.0));
    CHECK(channel_from_string("velocity") == Channel::velocity);
    CHECK_THROWS(channel_from_string("jerk"));
}
