#pragma once

#include "pigp/oscillator_sim.hpp"
#include "pigp/time_series.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace pigp {

/// Turbulence parameters; defaults are the Great Belt buffeting values.
struct WindConfig {
    double U = 30.0;  ///< mean wind speed, m/s
    double I_u = 0.08;
    double I_w = 0.06;
    double L_u = 60.0;  ///< integral length scales, m
    double L_w = 60.0;
    double dt = 0.05;
    double duration = 600.0;
    std::vector<double> nodes{0.0};  ///< span positions, m
    double coherence_decay = 10.0;   ///< Davenport constant

    [[nodiscard]] double sigma_u() const { return I_u * U; }
    [[nodiscard]] double sigma_w() const { return I_w * U; }
    /// round(duration / dt)
    [[nodiscard]] Eigen::Index samples() const;
    void validate() const;
};

enum class WindComponent { u, w };

std::string to_string(WindComponent c);

/// One-sided von Kármán spectrum, (m/s)²/Hz.
double von_karman_psd(double f, WindComponent component, const WindConfig& cfg);

/// Davenport coherence exp(-C f dx / U).
double coherence(double f, double dx, const WindConfig& cfg);

/// u and w histories, one column per node, sampled from t0 = 0.
struct TurbulenceField {
    double dt = 1.0;
    double U = 0.0;
    std::vector<double> nodes;
    Eigen::MatrixXd u;  ///< samples x nodes
    Eigen::MatrixXd w;
    /// Frequency lines whose coherence matrix needed eigenvalue clipping.
    int clipped_frequencies = 0;

    [[nodiscard]] Eigen::Index samples() const { return u.rows(); }
    [[nodiscard]] TimeSeries u_at(Eigen::Index node) const { return {0.0, dt, u.col(node)}; }
    [[nodiscard]] TimeSeries w_at(Eigen::Index node) const { return {0.0, dt, w.col(node)}; }
};

/// Spectral-representation synthesis on the FFT grid f_k = k / (N dt),
/// k = 1..N/2. Each line's cross-spectral matrix S(f) C(f) is factored by
/// Cholesky, falling back to a clipped eigen-factorization. Phases are uniform
/// draws from one mt19937_64 stream: all u lines (node-major), then all w.
TurbulenceField synthesize_turbulence(const WindConfig& cfg, std::uint64_t seed);

/// Deck section used by the quasi-steady load model. Coefficient defaults are
/// representative streamlined-box values, not measured ones.
struct AeroSection {
    double rho = 1.25;
    double B = 31.0;
    double H = 4.4;
    double C_D = 0.08;
    double C_L = -0.10;
    double C_M = 0.02;
    double dC_L = 4.4;  ///< per rad
    double dC_M = 1.2;
    /// Liepmann approximation of the Sears admittance, |chi|² = 1 / (1 + 2 pi f B / U).
    bool admittance_on = false;

    void validate() const;
};

/// Quasi-steady buffeting loads per unit length, projected on every mode by
/// trapezoidal quadrature: drag drives the lateral shape component, lift the
/// vertical one and the moment the torsional one.
std::vector<TimeSeries> buffeting_modal_forces(const TurbulenceField& field, const ModalModel& model,
                                               const AeroSection& sec);

}  // namespace pigp
