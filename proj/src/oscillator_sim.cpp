#include "pigp/oscillator_sim.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pigp {

const TimeSeries& ModalResponse::channel(Channel ch) const {
    switch (ch) {
        case Channel::displacement: return z;
        case Channel::velocity: return zdot;
        case Channel::acceleration: return zddot;
        case Channel::force: break;
    }
    throw std::invalid_argument("ModalResponse: force is not a response channel");
}

TimeSeries& ModalResponse::channel(Channel ch) {
    return const_cast<TimeSeries&>(static_cast<const ModalResponse&>(*this).channel(ch));
}

ModalResponse newmark_response(const OscillatorParams& osc, const TimeSeries& force, double gamma, double beta,
                               double z0, double v0) {
    osc.validate();
    if (!(force.dt > 0.0)) throw std::domain_error("newmark_response: dt must be positive");
    if (force.empty()) throw std::domain_error("newmark_response: empty force history");
    if (!(beta > 0.0)) throw std::domain_error("newmark_response: beta must be positive");

    const double m = osc.m, c = osc.damping(), k = osc.stiffness(), dt = force.dt;
    const Eigen::Index n = force.size();
    Eigen::VectorXd z(n), v(n), a(n);
    z[0] = z0;
    v[0] = v0;
    a[0] = (force.values[0] - c * v0 - k * z0) / m;

    const double a1 = 1.0 / (beta * dt * dt), a2 = 1.0 / (beta * dt), a3 = 1.0 / (2.0 * beta) - 1.0;
    const double a4 = gamma / (beta * dt), a5 = gamma / beta - 1.0, a6 = dt * (gamma / (2.0 * beta) - 1.0);
    const double k_eff = k + a4 * c + a1 * m;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double rhs = force.values[i + 1] + m * (a1 * z[i] + a2 * v[i] + a3 * a[i]) +
                           c * (a4 * z[i] + a5 * v[i] + a6 * a[i]);
        z[i + 1] = rhs / k_eff;
        a[i + 1] = a1 * (z[i + 1] - z[i]) - a2 * v[i] - a3 * a[i];
        v[i + 1] = v[i] + dt * ((1.0 - gamma) * a[i] + gamma * a[i + 1]);
    }
    return {{force.t0, dt, std::move(z)}, {force.t0, dt, std::move(v)}, {force.t0, dt, std::move(a)}};
}

TimeSeries add_noise_snr(const TimeSeries& signal, double snr, std::uint64_t seed, SnrUnit unit) {
    if (signal.empty()) throw std::domain_error("add_noise_snr: empty signal");
    if (!(snr > 0.0) && unit == SnrUnit::linear) throw std::domain_error("add_noise_snr: snr must be positive");
    const double ratio = unit == SnrUnit::linear ? snr : std::pow(10.0, snr / 20.0);
    const double sigma = rms(signal) / ratio;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    TimeSeries out = signal;
    for (auto& x : out.values) x += sigma * n01(rng);
    return out;
}

NodalField add_noise_snr(const NodalField& field, double snr, std::uint64_t seed, SnrUnit unit) {
    NodalField out = field;
    for (Eigen::Index col = 0; col < field.values.cols(); ++col) {
        const TimeSeries column = field.column(col);
        if (column.values.cwiseAbs().maxCoeff() == 0.0) continue;
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(col)};
        std::mt19937_64 mix(seq);
        out.values.col(col) = add_noise_snr(column, snr, mix(), unit).values;
    }
    return out;
}

std::string to_string(Direction d) {
    switch (d) {
        case Direction::lateral: return "lateral";
        case Direction::vertical: return "vertical";
        case Direction::torsional: return "torsional";
    }
    return "unknown";
}

Direction direction_from_string(const std::string& name) {
    if (name == "lateral" || name == "sway") return Direction::lateral;
    if (name == "vertical" || name == "bending") return Direction::vertical;
    if (name == "torsional" || name == "torsion") return Direction::torsional;
    throw std::invalid_argument("unknown mode direction '" + name + "'");
}

Eigen::MatrixXd ModalModel::shape_matrix() const {
    Eigen::MatrixXd phi(dof_count(), static_cast<Eigen::Index>(modes.size()));
    for (std::size_t j = 0; j < modes.size(); ++j)
        for (Eigen::Index i = 0; i < node_count(); ++i)
            for (int d = 0; d < kDofsPerNode; ++d)
                phi(kDofsPerNode * i + d, static_cast<Eigen::Index>(j)) = modes[j].shape(i, d);
    return phi;
}

void ModalModel::validate() const {
    if (node_coords.empty()) throw std::domain_error("ModalModel: no nodes");
    for (std::size_t i = 1; i < node_coords.size(); ++i)
        if (!(node_coords[i] > node_coords[i - 1]))
            throw std::domain_error("ModalModel: node coordinates must be strictly increasing");
    for (const auto& mode : modes) {
        mode.osc.validate();
        if (mode.shape.rows() != node_count())
            throw std::domain_error("ModalModel: mode '" + mode.name + "' shape does not match node count");
        if (mass_normalized && mode.osc.m != 1.0)
            throw std::domain_error("ModalModel: mass-normalized model with modal mass != 1");
    }
}

ModalModel synthetic_modal_model(double span, int n_nodes, const std::vector<ModeSpec>& specs) {
    if (!(span > 0.0) || n_nodes < 2) throw std::domain_error("synthetic_modal_model: need span > 0 and >= 2 nodes");
    ModalModel model;
    for (int i = 0; i < n_nodes; ++i) model.node_coords.push_back(span * i / (n_nodes - 1));
    model.mass_normalized = true;
    for (const auto& spec : specs) {
        if (spec.half_waves < 1) throw std::domain_error("synthetic_modal_model: half_waves must be >= 1");
        Mode mode;
        mode.name = spec.name;
        mode.osc = {spec.mass, spec.zeta, 2.0 * std::numbers::pi * spec.frequency_hz};
        mode.shape = Eigen::Matrix<double, Eigen::Dynamic, kDofsPerNode>::Zero(n_nodes, kDofsPerNode);
        for (int i = 0; i < n_nodes; ++i)
            mode.shape(i, static_cast<int>(spec.direction)) =
                std::sin(spec.half_waves * std::numbers::pi * model.node_coords[static_cast<std::size_t>(i)] / span);
        if (spec.mass != 1.0) model.mass_normalized = false;
        model.modes.push_back(std::move(mode));
    }
    model.validate();
    return model;
}

std::vector<ModeSpec> default_bridge_modes() {
    return {{"sway-1", 0.052, 0.005, 1.0, Direction::lateral, 1},
            {"bending-1", 0.100, 0.005, 1.0, Direction::vertical, 1},
            {"sway-2", 0.123, 0.005, 1.0, Direction::lateral, 2},
            {"torsion-1", 0.278, 0.005, 1.0, Direction::torsional, 1}};
}

std::vector<TimeSeries> modal_decompose(const NodalField& field, const ModalModel& model) {
    model.validate();
    if (field.values.cols() != model.dof_count())
        throw std::domain_error("modal_decompose: field DOF count does not match the modal model");
    const Eigen::MatrixXd phi = model.shape_matrix();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    if (qr.rank() < phi.cols()) throw std::domain_error("modal_decompose: mode-shape matrix is rank deficient");
    const Eigen::MatrixXd q = qr.solve(field.values.transpose()).transpose();  // samples x modes
    std::vector<TimeSeries> out;
    for (Eigen::Index j = 0; j < q.cols(); ++j) out.emplace_back(field.t0, field.dt, q.col(j));
    return out;
}

NodalField modal_superpose(const std::vector<TimeSeries>& modal, const ModalModel& model) {
    model.validate();
    if (modal.size() != model.modes.size())
        throw std::domain_error("modal_superpose: one modal series per mode required");
    if (modal.empty()) throw std::domain_error("modal_superpose: no modes");
    Eigen::MatrixXd q(modal.front().size(), static_cast<Eigen::Index>(modal.size()));
    for (std::size_t j = 0; j < modal.size(); ++j) {
        if (!modal[j].same_grid(modal.front())) throw std::domain_error("modal_superpose: modal grids differ");
        q.col(static_cast<Eigen::Index>(j)) = modal[j].values;
    }
    return {modal.front().t0, modal.front().dt, q * model.shape_matrix().transpose()};
}

TrainingSet subsample_training(const ModalResponse& response, double dt_train, const std::set<Channel>& channels) {
    if (channels.empty()) throw std::domain_error("subsample_training: no channels requested");
    const TimeSeries& ref = response.channel(*channels.begin());
    if (ref.empty()) throw std::domain_error("subsample_training: empty response");
    return subsample_training(response, dt_train, channels, ref.t0, ref.t_end());
}

TrainingSet subsample_training(const ModalResponse& response, double dt_train, const std::set<Channel>& channels,
                               double t_begin, double t_end) {
    if (channels.empty()) throw std::domain_error("subsample_training: no channels requested");
    // Unrequested channels may be left empty; the first requested one sets the grid.
    const TimeSeries& ref = response.channel(*channels.begin());
    if (ref.empty()) throw std::domain_error("subsample_training: empty response");
    if (!(dt_train >= ref.dt * (1.0 - 1e-12)))
        throw std::domain_error("subsample_training: dt_train must not be smaller than the sampling interval");
    t_begin = std::max(t_begin, ref.t0);
    t_end = std::min(t_end, ref.t_end());
    const double eps = 1e-9 * ref.dt;

    std::vector<Observation> obs;
    for (Channel ch : channels) {
        const TimeSeries& series = response.channel(ch);
        if (!series.same_grid(ref)) throw std::domain_error("subsample_training: response channels on different grids");
        Eigen::Index last = -1;
        for (long k = 0;; ++k) {
            const double t = t_begin + static_cast<double>(k) * dt_train;
            if (t > t_end + eps) break;
            const auto idx = static_cast<Eigen::Index>(std::llround((t - ref.t0) / ref.dt));
            if (idx == last || idx >= series.size()) continue;
            last = idx;
            obs.push_back({series.time(idx), series.values[idx], ch});
        }
    }
    return TrainingSet(std::move(obs));
}

}  // namespace pigp
