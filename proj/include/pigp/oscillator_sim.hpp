#pragma once

#include "pigp/gp_engine.hpp"
#include "pigp/kernels.hpp"
#include "pigp/time_series.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace pigp {

/// Displacement, velocity and acceleration histories of one mode.
struct ModalResponse {
    TimeSeries z;
    TimeSeries zdot;
    TimeSeries zddot;

    [[nodiscard]] const TimeSeries& channel(Channel ch) const;
    [[nodiscard]] TimeSeries& channel(Channel ch);
};

/// Newmark-beta integration of m z'' + c z' + k z = F on the force grid.
/// gamma = 1/2, beta = 1/4 is the unconditionally stable average-acceleration rule.
ModalResponse newmark_response(const OscillatorParams& osc, const TimeSeries& force, double gamma = 0.5,
                               double beta = 0.25, double z0 = 0.0, double v0 = 0.0);

enum class SnrUnit { linear, decibel };

/// signal + white Gaussian noise with std = RMS(signal) / snr. A decibel SNR is
/// converted as an amplitude ratio, 10^(dB/20).
TimeSeries add_noise_snr(const TimeSeries& signal, double snr, std::uint64_t seed,
                         SnrUnit unit = SnrUnit::linear);

/// Degrees of freedom per deck node.
enum class Direction { lateral = 0, vertical = 1, torsional = 2 };
inline constexpr int kDofsPerNode = 3;

std::string to_string(Direction d);
Direction direction_from_string(const std::string& name);

struct Mode {
    std::string name;
    OscillatorParams osc;
    /// n_nodes x 3 samples of the shape; columns follow Direction.
    Eigen::Matrix<double, Eigen::Dynamic, kDofsPerNode> shape;
};

/// Deck nodes plus mode shapes. Either every modal mass is 1 (mass-normalized
/// shapes) or the masses are explicit; `mass_normalized` records which.
struct ModalModel {
    std::vector<double> node_coords;
    std::vector<Mode> modes;
    bool mass_normalized = true;

    [[nodiscard]] Eigen::Index node_count() const { return static_cast<Eigen::Index>(node_coords.size()); }
    [[nodiscard]] Eigen::Index dof_count() const { return node_count() * kDofsPerNode; }
    /// (3 n_nodes) x n_modes matrix; row 3 i + d is DOF d of node i.
    [[nodiscard]] Eigen::MatrixXd shape_matrix() const;
    void validate() const;
};

struct ModeSpec {
    std::string name;
    double frequency_hz = 0.1;
    double zeta = 0.005;
    double mass = 1.0;
    Direction direction = Direction::vertical;
    int half_waves = 1;
};

/// Half-sine shapes sin(n pi x / span) on equally spaced nodes over [0, span].
ModalModel synthetic_modal_model(double span, int n_nodes, const std::vector<ModeSpec>& specs);

/// Four-mode default: sway 0.052 Hz, bending 0.100 Hz, sway 0.123 Hz, torsion 0.278 Hz.
std::vector<ModeSpec> default_bridge_modes();

/// Multi-channel field sampled on a common grid; one column per global DOF
/// (node-major, see ModalModel::shape_matrix), one row per time step.
struct NodalField {
    double t0 = 0.0;
    double dt = 1.0;
    Eigen::MatrixXd values;

    [[nodiscard]] Eigen::Index samples() const { return values.rows(); }
    [[nodiscard]] TimeSeries column(Eigen::Index dof) const { return {t0, dt, values.col(dof)}; }
};

/// Noise at the given SNR added independently to every column; all-zero
/// columns (support DOFs, unexcited directions) stay zero.
NodalField add_noise_snr(const NodalField& field, double snr, std::uint64_t seed, SnrUnit unit = SnrUnit::linear);

/// Least-squares modal coordinates of a nodal field, one series per mode.
std::vector<TimeSeries> modal_decompose(const NodalField& field, const ModalModel& model);

/// Nodal field rebuilt from modal coordinates.
NodalField modal_superpose(const std::vector<TimeSeries>& modal, const ModalModel& model);

/// Nearest-sample decimation of a response onto t0, t0 + dt_train, ... for the
/// requested channels, optionally restricted to [t_begin, t_end].
TrainingSet subsample_training(const ModalResponse& response, double dt_train, const std::set<Channel>& channels);
TrainingSet subsample_training(const ModalResponse& response, double dt_train, const std::set<Channel>& channels,
                               double t_begin, double t_end);

}  // namespace pigp
