#include "pigp/wind_field.hpp"

#include "pigp/fft.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pigp {

namespace {

constexpr double kPi = std::numbers::pi;

// Factor G with G G^T = C. Returns false when eigenvalues had to be clipped.
bool factor_coherence(const Eigen::MatrixXd& c, Eigen::MatrixXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
        g = llt.matrixL();
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    // eigenvalues at rounding level are noise of a semi-definite matrix
    const double floor = 1e-12 * eig.eigenvalues().cwiseAbs().maxCoeff();
    const Eigen::VectorXd lam = (eig.eigenvalues().array() > floor).select(eig.eigenvalues(), 0.0);
    g = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    return false;
}

// Zero-phase filter on every column: bin f is scaled by gain(|f|).
template <class Gain>
Eigen::MatrixXd filter_columns(const Eigen::MatrixXd& x, double dt, Gain gain) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    const Eigen::Index n = x.rows();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        auto spec = fft::forward(x.col(j));
        for (Eigen::Index k = 0; k < n; ++k) spec[static_cast<std::size_t>(k)] *= gain(std::abs(fft::bin_frequency(k, n, dt)));
        out.col(j) = fft::inverse_real(spec);
    }
    return out;
}

Eigen::VectorXd trapezoid_weights(const std::vector<double>& x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double h = x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i)];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

}  // namespace

Eigen::Index WindConfig::samples() const { return static_cast<Eigen::Index>(std::llround(duration / dt)); }

void WindConfig::validate() const {
    if (!(U > 0.0)) throw std::domain_error("WindConfig: U must be positive");
    if (!(I_u > 0.0 && I_u < 1.0) || !(I_w > 0.0 && I_w < 1.0))
        throw std::domain_error("WindConfig: turbulence intensities must lie in (0, 1)");
    if (!(L_u > 0.0) || !(L_w > 0.0)) throw std::domain_error("WindConfig: length scales must be positive");
    if (!(dt > 0.0)) throw std::domain_error("WindConfig: dt must be positive");
    if (!(duration > 0.0) || samples() < 2) throw std::domain_error("WindConfig: duration / dt must give at least 2 samples");
    if (nodes.empty()) throw std::domain_error("WindConfig: no nodes");
    if (!(coherence_decay >= 0.0)) throw std::domain_error("WindConfig: coherence_decay must be non-negative");
}

std::string to_string(WindComponent c) { return c == WindComponent::u ? "u" : "w"; }

double von_karman_psd(double f, WindComponent component, const WindConfig& cfg) {
    if (!(f >= 0.0)) throw std::domain_error("von_karman_psd: negative frequency");
    if (component == WindComponent::u) {
        const double s2 = cfg.sigma_u() * cfg.sigma_u();
        const double x = f * cfg.L_u / cfg.U;
        return 4.0 * s2 * (cfg.L_u / cfg.U) / std::pow(1.0 + 70.8 * x * x, 5.0 / 6.0);
    }
    const double s2 = cfg.sigma_w() * cfg.sigma_w();
    const double x = f * cfg.L_w / cfg.U;
    return 4.0 * s2 * (cfg.L_w / cfg.U) * (1.0 + 755.2 * x * x) / std::pow(1.0 + 283.2 * x * x, 11.0 / 6.0);
}

double coherence(double f, double dx, const WindConfig& cfg) {
    return std::exp(-cfg.coherence_decay * f * std::abs(dx) / cfg.U);
}

TurbulenceField synthesize_turbulence(const WindConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Eigen::Index n = cfg.samples();
    const auto m = static_cast<Eigen::Index>(cfg.nodes.size());
    const Eigen::Index lines = n / 2;
    const double df = 1.0 / (static_cast<double>(n) * cfg.dt);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
    auto draw_phases = [&] {
        Eigen::MatrixXd phi(m, lines + 1);
        for (Eigen::Index node = 0; node < m; ++node)
            for (Eigen::Index k = 1; k <= lines; ++k) phi(node, k) = uni(rng);
        return phi;
    };
    const Eigen::MatrixXd phi_u = draw_phases();
    const Eigen::MatrixXd phi_w = draw_phases();

    // Coefficients B_jk of both components; the coherence factor is shared.
    Eigen::MatrixXcd bu = Eigen::MatrixXcd::Zero(m, n), bw = Eigen::MatrixXcd::Zero(m, n);
    Eigen::MatrixXd c(m, m), g;
    int clipped = 0;
    for (Eigen::Index k = 1; k <= lines; ++k) {
        const double f = static_cast<double>(k) * df;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                c(i, j) = coherence(f, cfg.nodes[static_cast<std::size_t>(i)] - cfg.nodes[static_cast<std::size_t>(j)], cfg);
        if (!factor_coherence(c, g)) ++clipped;
        const double au = std::sqrt(2.0 * df * von_karman_psd(f, WindComponent::u, cfg));
        const double aw = std::sqrt(2.0 * df * von_karman_psd(f, WindComponent::w, cfg));
        Eigen::VectorXcd eu(m), ew(m);
        for (Eigen::Index node = 0; node < m; ++node) {
            eu[node] = std::polar(1.0, phi_u(node, k));
            ew[node] = std::polar(1.0, phi_w(node, k));
        }
        bu.col(k) = au * (g.cast<std::complex<double>>() * eu);
        bw.col(k) = aw * (g.cast<std::complex<double>>() * ew);
    }

    // u_j(t_p) = Re sum_k B_jk exp(2 pi i k p / N) = Re(N ifft(B_j))
    auto superpose = [&](const Eigen::MatrixXcd& b) {
        Eigen::MatrixXd out(n, m);
        fft::Spectrum row(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index k = 0; k < n; ++k) row[static_cast<std::size_t>(k)] = b(j, k);
            const auto z = fft::inverse(row);
            for (Eigen::Index p = 0; p < n; ++p) out(p, j) = static_cast<double>(n) * z[static_cast<std::size_t>(p)].real();
        }
        return out;
    };

    TurbulenceField field;
    field.dt = cfg.dt;
    field.U = cfg.U;
    field.nodes = cfg.nodes;
    field.u = superpose(bu);
    field.w = superpose(bw);
    field.clipped_frequencies = clipped;
    return field;
}

void AeroSection::validate() const {
    if (!(rho > 0.0) || !(B > 0.0) || !(H > 0.0)) throw std::domain_error("AeroSection: rho, B and H must be positive");
}

std::vector<TimeSeries> buffeting_modal_forces(const TurbulenceField& field, const ModalModel& model,
                                               const AeroSection& sec) {
    sec.validate();
    model.validate();
    if (field.u.cols() != model.node_count() || field.w.cols() != model.node_count() || field.u.rows() != field.w.rows())
        throw std::domain_error("buffeting_modal_forces: field and modal model have different node grids");
    for (std::size_t i = 0; i < model.node_coords.size(); ++i)
        if (std::abs(field.nodes[i] - model.node_coords[i]) > 1e-9 * (1.0 + std::abs(model.node_coords[i])))
            throw std::domain_error("buffeting_modal_forces: field and modal model have different node positions");
    if (!(field.U > 0.0)) throw std::domain_error("buffeting_modal_forces: field has no mean wind speed");

    Eigen::MatrixXd u = field.u, w = field.w;
    if (sec.admittance_on) {
        const double b_over_u = sec.B / field.U;
        auto chi = [b_over_u](double f) { return 1.0 / std::sqrt(1.0 + 2.0 * kPi * f * b_over_u); };
        u = filter_columns(u, field.dt, chi);
        w = filter_columns(w, field.dt, chi);
    }

    // Per-unit-length loads are linear in (u, w): q = qU (a u + b w) with qU = rho U B / 2.
    const double q = 0.5 * sec.rho * field.U * sec.B;
    const double drag_u = q * 2.0 * sec.C_D;
    const double lift_u = q * 2.0 * sec.C_L;
    const double lift_w = q * (sec.dC_L + sec.C_D * sec.H / sec.B);
    const double moment_u = q * sec.B * 2.0 * sec.C_M;
    const double moment_w = q * sec.B * sec.dC_M;

    const Eigen::VectorXd wt = trapezoid_weights(model.node_coords);
    std::vector<TimeSeries> forces;
    forces.reserve(model.modes.size());
    for (const auto& mode : model.modes) {
        const Eigen::VectorXd lat = wt.cwiseProduct(mode.shape.col(static_cast<int>(Direction::lateral)));
        const Eigen::VectorXd ver = wt.cwiseProduct(mode.shape.col(static_cast<int>(Direction::vertical)));
        const Eigen::VectorXd tor = wt.cwiseProduct(mode.shape.col(static_cast<int>(Direction::torsional)));
        const Eigen::VectorXd pu = drag_u * lat + lift_u * ver + moment_u * tor;
        const Eigen::VectorXd pw = lift_w * ver + moment_w * tor;
        forces.emplace_back(0.0, field.dt, u * pu + w * pw);
    }
    return forces;
}

}  // namespace pigp
