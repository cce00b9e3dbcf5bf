#pragma once

#include "pigp/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pigp {

using Vector5d = Eigen::Matrix<double, 5, 1>;

/// One measured sample of a response channel.
struct Observation {
    double time;
    double value;
    Channel channel;
};

/// Heterogeneous, possibly irregularly sampled response observations of a
/// single mode. Only displacement, velocity and acceleration channels are
/// accepted and each (time, channel) pair appears at most once.
class TrainingSet {
public:
    explicit TrainingSet(std::vector<Observation> entries);

    [[nodiscard]] const std::vector<Observation>& entries() const { return entries_; }
    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }
    [[nodiscard]] Eigen::VectorXd values() const;
    [[nodiscard]] bool has_channel(Channel ch) const;
    [[nodiscard]] std::size_t count(Channel ch) const;
    /// Sample standard deviation of one channel's values; 0 if absent.
    [[nodiscard]] double channel_std(Channel ch) const;
    [[nodiscard]] double time_span() const;
    /// Median spacing between consecutive distinct observation times.
    [[nodiscard]] double median_spacing() const;

    /// Copy with every value multiplied by `factor`.
    [[nodiscard]] TrainingSet scaled(double factor) const;

private:
    std::vector<Observation> entries_;
};

/// The trainable parameters: SE kernel scale and length plus one noise
/// standard deviation per response channel. All strictly positive.
struct Hyperparams {
    double sigma_s = 1.0;
    double ell = 1.0;
    double sigma_z = 0.1;
    double sigma_zdot = 0.1;
    double sigma_zddot = 0.1;

    [[nodiscard]] KernelParams kernel() const { return {sigma_s, ell}; }
    [[nodiscard]] double noise_std(Channel ch) const;
    /// (log sigma_s, log ell, log sigma_z, log sigma_zdot, log sigma_zddot)
    [[nodiscard]] Vector5d to_log() const;
    static Hyperparams from_log(const Vector5d& log_params);
    void validate() const;
};

/// Index of each parameter inside the log-parameter vector.
enum HyperparamIndex : int { kSigmaS = 0, kEll = 1, kSigmaZ = 2, kSigmaZdot = 3, kSigmaZddot = 4 };

/// Full heterogeneous covariance of the observations, noise on the diagonal.
Eigen::MatrixXd assemble_covariance(const TrainingSet& train, const Hyperparams& hp,
                                    const OscillatorParams& osc);

/// Cholesky factor of K + jitter I. The jitter starts at 1e-10 mean(diag K)
/// and grows by 10x up to 1e-4 mean(diag K); NumericalError past that.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    [[nodiscard]] double log_det() const;
};

JitteredCholesky factorize_with_jitter(const Eigen::MatrixXd& K);

/// log N(y | 0, K) evaluated through the Cholesky factor.
double log_marginal_likelihood(const Eigen::VectorXd& y, const Eigen::MatrixXd& K);

struct LmlEvaluation {
    double value = 0.0;
    Vector5d gradient = Vector5d::Zero();  ///< with respect to log-parameters
    double jitter = 0.0;
};

/// Log marginal likelihood of the training data and, optionally, its
/// gradient with respect to the log-hyperparameters.
LmlEvaluation evaluate_lml(const TrainingSet& train, const Hyperparams& hp, const OscillatorParams& osc,
                           bool with_gradient = true);

inline Vector5d lml_gradient(const TrainingSet& train, const Hyperparams& hp,
                             const OscillatorParams& osc) {
    return evaluate_lml(train, hp, osc, true).gradient;
}

struct OptimizerOptions {
    int restarts = 4;
    std::uint64_t seed = 0;
    double gradient_tolerance = 1e-6;  ///< infinity norm in log-parameter space
    int max_iterations = 500;
};

struct RestartOutcome {
    Hyperparams start;
    Hyperparams result;
    double lml = 0.0;
    int iterations = 0;
    double gradient_inf_norm = 0.0;
    bool converged = false;
    bool failed = false;
};

struct OptimizationResult {
    Hyperparams hp;
    double lml = 0.0;
    std::vector<RestartOutcome> restarts;
};

/// Draw the starting point of restart `index` for the given seed.
Hyperparams initial_guess(const TrainingSet& train, std::uint64_t seed, int index);

/// Multi-start BFGS ascent of the log marginal likelihood over log-parameters.
/// Deterministic for a fixed seed. Throws NumericalError if every restart fails.
OptimizationResult optimize_hyperparams(const TrainingSet& train, const OscillatorParams& osc,
                                        const OptimizerOptions& options);

/// Gaussian posterior of the latent force on a prediction grid.
struct PosteriorForce {
    Eigen::VectorXd times;
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;              ///< marginal variance, unclipped
    std::optional<Eigen::MatrixXd> cov;    ///< present for CovarianceMode::full
    double jitter = 0.0;                   ///< diagonal jitter used to factor K

    [[nodiscard]] Eigen::VectorXd stddev() const;  ///< negative variances clipped to 0
    [[nodiscard]] Eigen::VectorXd lower95() const;
    [[nodiscard]] Eigen::VectorXd upper95() const;
};

enum class CovarianceMode { full, marginal };

/// Condition the force channel on the training data with fixed hyperparameters.
/// `marginal` skips the M x M covariance and is the mode to use on long grids.
PosteriorForce predict_force(const TrainingSet& train, const Hyperparams& hp, const OscillatorParams& osc,
                             std::span<const double> t_star, CovarianceMode mode = CovarianceMode::full);

}  // namespace pigp
