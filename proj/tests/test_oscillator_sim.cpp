#include "pigp/oscillator_sim.hpp"

#include "response_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace pigp;

namespace {

constexpr double kPi = std::numbers::pi;

TimeSeries constant_force(double value, double dt, Eigen::Index n) {
    return {0.0, dt, Eigen::VectorXd::Constant(n, value)};
}

// Sum of tones at integer multiples of 1/period, so the record is exactly periodic.
TimeSeries band_limited_force(double period, double dt, double f_max, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(std::llround(period / dt));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    const int harmonics = static_cast<int>(f_max * period);
    for (int h = 1; h <= harmonics; ++h) {
        const double ph = phase(rng);
        const double amp = 1.0 / std::sqrt(static_cast<double>(h));
        for (Eigen::Index i = 0; i < n; ++i) f[i] += amp * std::cos(2.0 * kPi * h / period * i * dt + ph);
    }
    return {0.0, dt, f};
}

double newmark_error(const OscillatorParams& osc, double period, double dt) {
    const TimeSeries force = band_limited_force(period, dt, 0.5, 99);
    const auto exact = oracle::periodic_steady_state(osc, force);
    const auto r = newmark_response(osc, force, 0.5, 0.25, exact.z[0], exact.zdot[0]);
    return (r.z.values - exact.z).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("newmark settles to the static deflection") {
    const OscillatorParams osc{2.0, 0.5, 1.5};
    const auto r = newmark_response(osc, constant_force(osc.stiffness(), 0.01, 5001));
    CHECK(r.z.values[r.z.size() - 1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("newmark free decay follows the logarithmic decrement") {
    const double zeta = 0.05;
    const OscillatorParams osc{1.0, zeta, 2.0 * kPi};
    const double dt = 1e-3;
    const auto r = newmark_response(osc, constant_force(0.0, dt, 6001), 0.5, 0.25, 1.0, 0.0);
    // successive positive peaks, refined by parabolic interpolation
    std::vector<double> peaks;
    for (Eigen::Index i = 1; i + 1 < r.z.size(); ++i) {
        const double a = r.z.values[i - 1], b = r.z.values[i], c = r.z.values[i + 1];
        if (b > a && b >= c && b > 0.0) peaks.push_back(b - 0.125 * (a - c) * (a - c) / (a - 2 * b + c));
    }
    REQUIRE(peaks.size() >= 3);
    const double expected = std::exp(-2.0 * kPi * zeta / std::sqrt(1.0 - zeta * zeta));
    CHECK(peaks[2] / peaks[1] == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("newmark resonant amplitude matches the mechanical admittance") {
    const double zeta = 0.05;
    const OscillatorParams osc{1.0, zeta, 2.0 * kPi};
    const double dt = 0.005;
    Eigen::VectorXd f(20001);
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = std::sin(osc.omega_n * i * dt);
    const auto r = newmark_response(osc, {0.0, dt, f});
    const double steady = r.z.values.tail(2000).cwiseAbs().maxCoeff();
    CHECK(steady == doctest::Approx(1.0 / (2.0 * zeta * osc.stiffness() * std::sqrt(1.0 - zeta * zeta))).epsilon(0.02));
}

TEST_CASE("newmark acceleration satisfies equilibrium at every step") {
    const OscillatorParams osc{1.3, 0.02, 2.0 * kPi * 0.1};
    const TimeSeries force = band_limited_force(200.0, 0.05, 0.3, 5);
    const auto r = newmark_response(osc, force);
    const Eigen::VectorXd residual = osc.m * r.zddot.values + osc.damping() * r.zdot.values +
                                     osc.stiffness() * r.z.values - force.values;
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-9 * force.values.cwiseAbs().maxCoeff());
}

TEST_CASE("newmark rejects non-positive time steps") {
    TimeSeries bad;
    bad.dt = 0.0;
    bad.values = Eigen::VectorXd::Zero(4);
    CHECK_THROWS_AS(newmark_response({1.0, 0.0, 1.0}, bad), std::domain_error);
    CHECK_THROWS_AS(TimeSeries(0.0, -0.1, Eigen::VectorXd::Zero(3)), std::domain_error);
}

TEST_CASE("average acceleration conserves energy of undamped free vibration") {
    const OscillatorParams osc{1.0, 0.0, 2.0 * kPi};
    const double period = 1.0, dt = period / 50.0;
    const auto r = newmark_response(osc, constant_force(0.0, dt, 100 * 50 + 1), 0.5, 0.25, 1.0, 0.0);
    const Eigen::ArrayXd energy =
        0.5 * osc.m * r.zdot.values.array().square() + 0.5 * osc.stiffness() * r.z.values.array().square();
    CHECK(((energy - energy[0]).abs() / energy[0]).maxCoeff() <= 1e-3);
}

TEST_CASE("newmark converges at second order to the frequency-domain solution") {
    const OscillatorParams osc{1.0, 0.02, 2.0 * kPi * 0.1};
    const double e1 = newmark_error(osc, 100.0, 0.1);
    const double e2 = newmark_error(osc, 100.0, 0.05);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("add_noise_snr statistics and determinism") {
    const Eigen::Index n = 100000;
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s[i] = std::sqrt(2.0) * std::sin(0.01 * i);
    const TimeSeries sig{0.0, 0.05, s};
    const double r = rms(sig);

    const auto quiet = add_noise_snr(sig, 1e12, 1);
    CHECK((quiet.values - s).cwiseAbs().maxCoeff() <= 1e-11 * r);

    const auto noisy = add_noise_snr(sig, 20.0, 2);
    const Eigen::VectorXd e = noisy.values - s;
    const double std_e = std::sqrt((e.array() - e.mean()).square().mean());
    CHECK(std_e == doctest::Approx(r / 20.0).epsilon(0.05));

    const auto again = add_noise_snr(sig, 20.0, 2);
    CHECK(again.values == noisy.values);

    // whiteness: normalized autocorrelation within 3 / sqrt(N) at nonzero lags
    const Eigen::ArrayXd c = e.array() - e.mean();
    const double c0 = c.square().sum();
    for (Eigen::Index lag = 1; lag <= 20; ++lag) {
        const double ck = (c.head(n - lag) * c.tail(n - lag)).sum() / c0;
        CHECK(std::abs(ck) <= 3.0 / std::sqrt(static_cast<double>(n)));
    }

    const auto db = add_noise_snr(sig, 20.0, 2, SnrUnit::decibel);
    const Eigen::VectorXd e_db = db.values - s;
    CHECK(std::sqrt(e_db.squaredNorm() / n) == doctest::Approx(r / 10.0).epsilon(0.05));

    CHECK_THROWS_AS(add_noise_snr(TimeSeries{0.0, 1.0, Eigen::VectorXd()}, 20.0, 1), std::domain_error);
    CHECK_THROWS_AS(add_noise_snr(sig, 0.0, 1), std::domain_error);
}

TEST_CASE("modal decomposition and superposition") {
    const double span = 1624.0;
    const auto model = synthetic_modal_model(span, 21, default_bridge_modes());
    CHECK(model.mass_normalized);

    SUBCASE("round trip on mode-spanned data") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> n01;
        std::vector<TimeSeries> q;
        for (std::size_t j = 0; j < model.modes.size(); ++j) {
            Eigen::VectorXd v(200);
            for (auto& x : v) x = n01(rng);
            q.emplace_back(0.0, 0.05, v);
        }
        const auto field = modal_superpose(q, model);
        const auto back = modal_decompose(field, model);
        for (std::size_t j = 0; j < q.size(); ++j)
            CHECK((back[j].values - q[j].values).cwiseAbs().maxCoeff() <= 1e-10);
    }

    SUBCASE("single half-sine mode is recovered exactly") {
        const auto single = synthetic_modal_model(span, 21, {{"b1", 0.1, 0.005, 1.0, Direction::vertical, 1}});
        Eigen::VectorXd q(100);
        for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = std::cos(0.1 * i);
        const auto field = modal_superpose({TimeSeries{0.0, 0.1, q}}, single);
        CHECK((modal_decompose(field, single)[0].values - q).cwiseAbs().maxCoeff() <= 1e-12);
        // midspan vertical DOF of a unit coordinate equals the shape value there
        const auto unit = modal_superpose({TimeSeries{0.0, 0.1, Eigen::VectorXd::Ones(3)}}, single);
        CHECK(unit.values(0, kDofsPerNode * 10 + 1) == doctest::Approx(single.modes[0].shape(10, 1)));
        CHECK(unit.values(0, kDofsPerNode * 10 + 1) == doctest::Approx(1.0));
    }

    SUBCASE("zero coordinates give a zero field") {
        std::vector<TimeSeries> zeros(model.modes.size(), TimeSeries{0.0, 0.1, Eigen::VectorXd::Zero(10)});
        CHECK(modal_superpose(zeros, model).values.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("noise residual lies in the complement of the mode space") {
        std::vector<TimeSeries> q(model.modes.size(), TimeSeries{0.0, 0.1, Eigen::VectorXd::Ones(500)});
        const auto clean = modal_superpose(q, model);
        const auto noisy = add_noise_snr(clean, 5.0, 9);
        const auto rebuilt = modal_superpose(modal_decompose(noisy, model), model);
        const Eigen::MatrixXd residual = noisy.values - rebuilt.values;
        const Eigen::MatrixXd noise = noisy.values - clean.values;
        const double residual_power = residual.squaredNorm();
        CHECK(residual_power >= 0.0);
        CHECK(residual_power <= noise.squaredNorm());
        // orthogonal to every mode shape
        CHECK((residual * model.shape_matrix()).cwiseAbs().maxCoeff() <= 1e-9 * noise.cwiseAbs().maxCoeff() * 100);
    }

    SUBCASE("rank-deficient shapes and mismatched grids are rejected") {
        auto dup = default_bridge_modes();
        dup.push_back(dup.front());
        const auto bad = synthetic_modal_model(span, 21, dup);
        NodalField field{0.0, 0.1, Eigen::MatrixXd::Zero(4, bad.dof_count())};
        CHECK_THROWS_AS(modal_decompose(field, bad), std::domain_error);
        NodalField wrong{0.0, 0.1, Eigen::MatrixXd::Zero(4, 5)};
        CHECK_THROWS_AS(modal_decompose(wrong, model), std::domain_error);
    }
}

TEST_CASE("subsample_training decimation counts") {
    const Eigen::Index n = 1201;  // 60 s at dt = 0.05
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
    const ModalResponse resp{{0.0, 0.05, v}, {0.0, 0.05, 2 * v}, {0.0, 0.05, 3 * v}};
    const std::set<Channel> all{Channel::displacement, Channel::velocity, Channel::acceleration};

    const auto train = subsample_training(resp, 1.25, all);
    CHECK(train.size() == 3 * 49);
    CHECK(train.count(Channel::velocity) == 49);

    const auto disp = subsample_training(resp, 1.25, {Channel::displacement});
    CHECK(disp.size() == 49);
    CHECK_FALSE(disp.has_channel(Channel::velocity));

    CHECK(subsample_training(resp, 0.05, {Channel::acceleration}).size() == n);
    CHECK_THROWS_AS(subsample_training(resp, 0.01, all), std::domain_error);

    const auto window = subsample_training(resp, 1.25, {Channel::displacement}, 10.0, 20.0);
    CHECK(window.size() == 9);
}
