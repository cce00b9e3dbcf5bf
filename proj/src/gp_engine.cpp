#include "pigp/gp_engine.hpp"

#include "pigp/errors.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>

namespace pigp {

// ---------------------------------------------------------------------------
// TrainingSet

TrainingSet::TrainingSet(std::vector<Observation> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw std::domain_error("TrainingSet: at least one observation required");
    std::set<std::pair<double, int>> seen;
    for (const auto& e : entries_) {
        if (e.channel == Channel::force)
            throw std::domain_error("TrainingSet: force is not an observable channel");
        if (!std::isfinite(e.time) || !std::isfinite(e.value))
            throw std::domain_error("TrainingSet: non-finite observation");
        if (!seen.emplace(e.time, static_cast<int>(e.channel)).second)
            throw std::domain_error("TrainingSet: duplicate (time, channel) observation");
    }
}

Eigen::VectorXd TrainingSet::values() const {
    Eigen::VectorXd y(size());
    for (Eigen::Index i = 0; i < size(); ++i) y[i] = entries_[static_cast<std::size_t>(i)].value;
    return y;
}

bool TrainingSet::has_channel(Channel ch) const { return count(ch) > 0; }

std::size_t TrainingSet::count(Channel ch) const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [ch](const Observation& e) { return e.channel == ch; }));
}

double TrainingSet::channel_std(Channel ch) const {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.channel != ch) continue;
        sum += e.value;
        sum_sq += e.value * e.value;
        ++n;
    }
    if (n < 2) return 0.0;
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean));
}

double TrainingSet::time_span() const {
    const auto [lo, hi] = std::minmax_element(entries_.begin(), entries_.end(),
                                              [](const auto& a, const auto& b) { return a.time < b.time; });
    return hi->time - lo->time;
}

double TrainingSet::median_spacing() const {
    std::vector<double> t;
    t.reserve(entries_.size());
    for (const auto& e : entries_) t.push_back(e.time);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    if (t.size() < 2) return 1.0;
    std::vector<double> gaps(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) gaps[i] = t[i + 1] - t[i];
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    return gaps[gaps.size() / 2];
}

TrainingSet TrainingSet::scaled(double factor) const {
    auto copy = entries_;
    for (auto& e : copy) e.value *= factor;
    return TrainingSet(std::move(copy));
}

// ---------------------------------------------------------------------------
// Hyperparams

double Hyperparams::noise_std(Channel ch) const {
    switch (ch) {
        case Channel::displacement: return sigma_z;
        case Channel::velocity: return sigma_zdot;
        case Channel::acceleration: return sigma_zddot;
        case Channel::force: break;
    }
    throw std::invalid_argument("Hyperparams: force channel has no noise parameter");
}

Vector5d Hyperparams::to_log() const {
    Vector5d v;
    v << std::log(sigma_s), std::log(ell), std::log(sigma_z), std::log(sigma_zdot), std::log(sigma_zddot);
    return v;
}

Hyperparams Hyperparams::from_log(const Vector5d& v) {
    return {std::exp(v[kSigmaS]), std::exp(v[kEll]), std::exp(v[kSigmaZ]), std::exp(v[kSigmaZdot]),
            std::exp(v[kSigmaZddot])};
}

void Hyperparams::validate() const {
    for (double p : {sigma_s, ell, sigma_z, sigma_zdot, sigma_zddot})
        if (!(p > 0.0) || !std::isfinite(p))
            throw std::domain_error("Hyperparams: all parameters must be positive and finite");
}

// ---------------------------------------------------------------------------
// Covariance assembly

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

// In-place inverse of a lower-triangular matrix by recursive 2x2 blocking,
// [A 0; B C]^-1 = [A^-1 0; -C^-1 B A^-1 C^-1]. About a third of the work of
// solving against the identity.
void invert_lower(Eigen::Ref<Eigen::MatrixXd> L) {
    const Eigen::Index n = L.rows();
    if (n <= 64) {
        Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
        L.triangularView<Eigen::Lower>().solveInPlace(inv);
        L.triangularView<Eigen::Lower>() = inv;
        return;
    }
    const Eigen::Index h = n / 2;
    auto a = L.topLeftCorner(h, h);
    auto b = L.bottomLeftCorner(n - h, h);
    auto c = L.bottomRightCorner(n - h, n - h);
    invert_lower(a);
    const Eigen::MatrixXd ba = b * a.triangularView<Eigen::Lower>();
    invert_lower(c);
    b.noalias() = -(c.triangularView<Eigen::Lower>() * ba);
}

// K^-1 = L^-T L^-1 from the Cholesky factor.
Eigen::MatrixXd inverse_from_cholesky(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    Eigen::MatrixXd li = llt.matrixL();
    invert_lower(li);
    li.triangularView<Eigen::StrictlyUpper>().setZero();
    Eigen::MatrixXd inv = li.transpose().triangularView<Eigen::Upper>() * li;
    return inv;
}

struct SignalCovariance {
    Eigen::MatrixXd signal;      // noise-free kernel block matrix
    Eigen::MatrixXd d_log_ell;   // elementwise derivative w.r.t. log(ell), optional
};

SignalCovariance assemble_signal(const TrainingSet& train, const Hyperparams& hp, const OdeOperator& op,
                                 bool with_ell_grad) {
    const auto& e = train.entries();
    const Eigen::Index n = train.size();
    const KernelParams kp = hp.kernel();
    SignalCovariance out;
    out.signal.resize(n, n);
    if (with_ell_grad) out.d_log_ell.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& ej = e[static_cast<std::size_t>(j)];
        for (Eigen::Index i = j; i < n; ++i) {
            const auto& ei = e[static_cast<std::size_t>(i)];
            if (with_ell_grad) {
                const auto kv = cross_kernel_with_grad(ei.channel, ej.channel, ei.time, ej.time, kp, op);
                out.signal(i, j) = out.signal(j, i) = kv.value;
                out.d_log_ell(i, j) = out.d_log_ell(j, i) = kv.d_log_ell;
            } else {
                out.signal(i, j) = out.signal(j, i) = cross_kernel(ei.channel, ej.channel, ei.time, ej.time, kp, op);
            }
        }
    }
    return out;
}

void add_noise_diagonal(Eigen::MatrixXd& K, const TrainingSet& train, const Hyperparams& hp) {
    const auto& e = train.entries();
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        const double s = hp.noise_std(e[static_cast<std::size_t>(i)].channel);
        K(i, i) += s * s;
    }
}

}  // namespace

Eigen::MatrixXd assemble_covariance(const TrainingSet& train, const Hyperparams& hp,
                                    const OscillatorParams& osc) {
    hp.validate();
    osc.validate();
    Eigen::MatrixXd K = assemble_signal(train, hp, OdeOperator::from(osc), false).signal;
    add_noise_diagonal(K, train, hp);
    return K;
}

double JitteredCholesky::log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

JitteredCholesky factorize_with_jitter(const Eigen::MatrixXd& K) {
    if (K.rows() != K.cols() || K.rows() == 0) throw std::domain_error("factorize_with_jitter: bad matrix shape");
    if (!K.allFinite()) throw NumericalError("covariance matrix contains non-finite entries");
    const double mean_diag = K.diagonal().mean();
    if (!(mean_diag > 0.0)) throw NumericalError("covariance matrix has non-positive mean diagonal");

    JitteredCholesky out;
    Eigen::MatrixXd work;
    for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
        work = K;
        out.jitter = rel * mean_diag;
        work.diagonal().array() += out.jitter;
        out.llt.compute(work);
        if (out.llt.info() == Eigen::Success) return out;
    }
    std::ostringstream msg;
    msg << "Cholesky factorization failed at maximum jitter " << kJitterMax * mean_diag << " (N=" << K.rows()
        << ", diag min=" << K.diagonal().minCoeff() << ", max=" << K.diagonal().maxCoeff()
        << ", max |offdiag|/diag ratio=" << (K.cwiseAbs().maxCoeff() / K.diagonal().minCoeff()) << ")";
    throw NumericalError(msg.str());
}

double log_marginal_likelihood(const Eigen::VectorXd& y, const Eigen::MatrixXd& K) {
    if (y.size() != K.rows()) throw std::domain_error("log_marginal_likelihood: size mismatch");
    const auto chol = factorize_with_jitter(K);
    const Eigen::VectorXd alpha = chol.llt.solve(y);
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha) - 0.5 * chol.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

LmlEvaluation evaluate_lml(const TrainingSet& train, const Hyperparams& hp, const OscillatorParams& osc,
                           bool with_gradient) {
    hp.validate();
    osc.validate();
    const auto sc = assemble_signal(train, hp, OdeOperator::from(osc), with_gradient);
    Eigen::MatrixXd K = sc.signal;
    add_noise_diagonal(K, train, hp);

    const Eigen::VectorXd y = train.values();
    const auto chol = factorize_with_jitter(K);
    const Eigen::VectorXd alpha = chol.llt.solve(y);
    const double n = static_cast<double>(y.size());

    LmlEvaluation out;
    out.jitter = chol.jitter;
    out.value = -0.5 * y.dot(alpha) - 0.5 * chol.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    // dL/dtheta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta)
    Eigen::MatrixXd W = inverse_from_cholesky(chol.llt);
    W = alpha * alpha.transpose() - W;

    out.gradient[kSigmaS] = (W.array() * sc.signal.array()).sum();  // dK/dlog sigma_s = 2 K_signal
    out.gradient[kEll] = 0.5 * (W.array() * sc.d_log_ell.array()).sum();
    const auto& e = train.entries();
    double diag_sum[3] = {0.0, 0.0, 0.0};
    for (Eigen::Index i = 0; i < train.size(); ++i)
        diag_sum[static_cast<int>(e[static_cast<std::size_t>(i)].channel)] += W(i, i);
    out.gradient[kSigmaZ] = hp.sigma_z * hp.sigma_z * diag_sum[0];
    out.gradient[kSigmaZdot] = hp.sigma_zdot * hp.sigma_zdot * diag_sum[1];
    out.gradient[kSigmaZddot] = hp.sigma_zddot * hp.sigma_zddot * diag_sum[2];
    return out;
}

// ---------------------------------------------------------------------------
// Optimization

namespace {

class NegativeLml final : public ceres::FirstOrderFunction {
public:
    NegativeLml(const TrainingSet& train, const OscillatorParams& osc)
        : train_(train), osc_(osc), scale_(1.0 / static_cast<double>(train.size())) {}

    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        const Vector5d x = Eigen::Map<const Vector5d>(parameters);
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 300.0) return false;
        try {
            const auto r = evaluate_lml(train_, Hyperparams::from_log(x), osc_, gradient != nullptr);
            if (!std::isfinite(r.value)) return false;
            cost[0] = -scale_ * r.value;
            if (gradient != nullptr) {
                if (!r.gradient.allFinite()) return false;
                Eigen::Map<Vector5d> g(gradient);
                g = -scale_ * r.gradient;
            }
            return true;
        } catch (const NumericalError&) {
            return false;
        } catch (const std::domain_error&) {
            return false;
        }
    }

    int NumParameters() const override { return 5; }

private:
    const TrainingSet& train_;
    OscillatorParams osc_;
    double scale_;  // per-observation objective keeps early BFGS steps moderate
};

// Near the optimum the line search can stall once cost differences reach
// rounding level. A few Newton steps on the analytic gradient, with a
// forward-difference Hessian, finish the job without needing cost decrease.
void newton_polish(const TrainingSet& train, const OscillatorParams& osc, Vector5d& x, double tolerance) {
    auto eval = [&](const Vector5d& p) { return evaluate_lml(train, Hyperparams::from_log(p), osc, true); };
    LmlEvaluation here = eval(x);
    for (int iter = 0; iter < 4 && here.gradient.cwiseAbs().maxCoeff() > tolerance; ++iter) {
        constexpr double h = 1e-5;
        Eigen::Matrix<double, 5, 5> hess;
        for (int k = 0; k < 5; ++k) {
            Vector5d xp = x;
            xp[k] += h;
            hess.col(k) = (eval(xp).gradient - here.gradient) / h;
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        // Parameters absent from K have an identically zero row; keep them fixed.
        for (int k = 0; k < 5; ++k)
            if (hess.row(k).cwiseAbs().maxCoeff() == 0.0) hess(k, k) = -1.0;
        const Vector5d step = -hess.ldlt().solve(here.gradient);
        if (!step.allFinite() || step.cwiseAbs().maxCoeff() > 0.5) return;
        const Vector5d candidate = x + step;
        LmlEvaluation next;
        try {
            next = eval(candidate);
        } catch (const std::exception&) {
            return;
        }
        if (!(next.gradient.cwiseAbs().maxCoeff() < here.gradient.cwiseAbs().maxCoeff()) ||
            next.value < here.value - 1e-9 * std::max(1.0, std::abs(here.value)))
            return;
        x = candidate;
        here = next;
    }
}

}  // namespace

Hyperparams initial_guess(const TrainingSet& train, std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);

    // Length scales much longer than the sampling interval start in the basin
    // where every observation is explained as noise, so draws stay within a
    // decade of the spacing; the first restart sits at twice the spacing.
    const double ell_lo = train.median_spacing();
    const double ell_hi = std::clamp(train.time_span() / 4.0, ell_lo, 10.0 * ell_lo);
    std::uniform_real_distribution<double> log_ell(std::log(ell_lo), std::log(ell_hi));
    Hyperparams hp;
    hp.ell = std::exp(log_ell(rng));
    if (index == 0) hp.ell = std::min(2.0 * ell_lo, ell_hi);

    const double std_z = train.channel_std(Channel::displacement);
    const double std_v = train.channel_std(Channel::velocity);
    const double std_a = train.channel_std(Channel::acceleration);
    if (std_z > 0.0)
        hp.sigma_s = std_z;
    else if (std_v > 0.0)
        hp.sigma_s = std_v * hp.ell;
    else if (std_a > 0.0)
        hp.sigma_s = std_a * hp.ell * hp.ell;
    else
        hp.sigma_s = 1.0;

    auto noise_start = [&](double channel_std, int order) {
        if (channel_std > 0.0) return 0.1 * channel_std;
        return 0.1 * hp.sigma_s / std::pow(hp.ell, order);
    };
    hp.sigma_z = noise_start(std_z, 0);
    hp.sigma_zdot = noise_start(std_v, 1);
    hp.sigma_zddot = noise_start(std_a, 2);
    return hp;
}

OptimizationResult optimize_hyperparams(const TrainingSet& train, const OscillatorParams& osc,
                                        const OptimizerOptions& options) {
    if (options.restarts < 1) throw std::domain_error("optimize_hyperparams: restarts must be >= 1");
    osc.validate();

    ceres::GradientProblemSolver::Options solver_options;
    solver_options.line_search_direction_type = ceres::BFGS;
    solver_options.max_num_iterations = options.max_iterations;
    solver_options.gradient_tolerance = options.gradient_tolerance / static_cast<double>(train.size());
    solver_options.function_tolerance = 1e-15;
    solver_options.parameter_tolerance = 1e-15;
    solver_options.logging_type = ceres::SILENT;
    solver_options.minimizer_progress_to_stdout = false;

    OptimizationResult result;
    result.lml = -std::numeric_limits<double>::infinity();
    bool any_success = false;
    for (int r = 0; r < options.restarts; ++r) {
        RestartOutcome outcome;
        outcome.start = initial_guess(train, options.seed, r);
        Vector5d x = outcome.start.to_log();

        // A stalled BFGS run (zero step before the gradient tolerance) is
        // relaunched from where it stopped, which resets the inverse-Hessian
        // approximation. The iteration budget is shared across relaunches.
        ceres::GradientProblem problem(new NegativeLml(train, osc));
        for (int launch = 0; launch < 4 && outcome.iterations < options.max_iterations; ++launch) {
            solver_options.max_num_iterations = options.max_iterations - outcome.iterations;
            ceres::GradientProblemSolver::Summary summary;
            ceres::Solve(solver_options, problem, x.data(), &summary);
            outcome.iterations += static_cast<int>(summary.iterations.size());
            if (summary.termination_type != ceres::CONVERGENCE ||
                summary.message.find("Gradient tolerance") != std::string::npos)
                break;
        }
        try {
            if (!x.allFinite()) throw NumericalError("non-finite parameters");
            newton_polish(train, osc, x, options.gradient_tolerance);
            outcome.result = Hyperparams::from_log(x);
            const auto eval = evaluate_lml(train, outcome.result, osc, true);
            outcome.lml = eval.value;
            outcome.gradient_inf_norm = eval.gradient.cwiseAbs().maxCoeff();
            outcome.converged = outcome.gradient_inf_norm <= options.gradient_tolerance;
            outcome.failed = !std::isfinite(outcome.lml);
        } catch (const std::exception&) {
            outcome.failed = true;
        }
        if (!outcome.failed) {
            any_success = true;
            if (outcome.lml > result.lml) {
                result.lml = outcome.lml;
                result.hp = outcome.result;
            }
        }
        result.restarts.push_back(outcome);
    }
    if (!any_success) throw NumericalError("hyperparameter optimization: every restart failed");
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

Eigen::VectorXd PosteriorForce::stddev() const { return variance.cwiseMax(0.0).cwiseSqrt(); }
Eigen::VectorXd PosteriorForce::lower95() const { return mean - 1.96 * stddev(); }
Eigen::VectorXd PosteriorForce::upper95() const { return mean + 1.96 * stddev(); }

PosteriorForce predict_force(const TrainingSet& train, const Hyperparams& hp, const OscillatorParams& osc,
                             std::span<const double> t_star, CovarianceMode mode) {
    if (t_star.empty()) throw std::domain_error("predict_force: empty prediction grid");
    const Eigen::MatrixXd K = assemble_covariance(train, hp, osc);
    const auto chol = factorize_with_jitter(K);
    const Eigen::VectorXd alpha = chol.llt.solve(train.values());

    const OdeOperator op = OdeOperator::from(osc);
    const KernelParams kp = hp.kernel();
    const auto& e = train.entries();
    const Eigen::Index n = train.size();
    const auto m = static_cast<Eigen::Index>(t_star.size());

    PosteriorForce out;
    out.jitter = chol.jitter;
    out.times = Eigen::Map<const Eigen::VectorXd>(t_star.data(), m);
    out.mean.resize(m);
    out.variance.resize(m);
    const double prior_var = cross_kernel(Channel::force, Channel::force, 0.0, 0.0, kp, op);

    // Columns of K* are processed in blocks so long grids stay within memory.
    const Eigen::Index block = mode == CovarianceMode::full ? m : std::min<Eigen::Index>(m, 512);
    Eigen::MatrixXd v_full;
    if (mode == CovarianceMode::full) v_full.resize(n, m);
    for (Eigen::Index start = 0; start < m; start += block) {
        const Eigen::Index cols = std::min(block, m - start);
        Eigen::MatrixXd ks(n, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double ts = t_star[static_cast<std::size_t>(start + j)];
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& ei = e[static_cast<std::size_t>(i)];
                ks(i, j) = cross_kernel(ei.channel, Channel::force, ei.time, ts, kp, op);
            }
        }
        out.mean.segment(start, cols) = ks.transpose() * alpha;
        chol.llt.matrixL().solveInPlace(ks);  // ks <- L^-1 K*
        out.variance.segment(start, cols) =
            (prior_var - ks.colwise().squaredNorm().array()).matrix().transpose();
        if (mode == CovarianceMode::full) v_full.middleCols(start, cols) = ks;
    }

    if (mode == CovarianceMode::full) {
        Eigen::MatrixXd cov(m, m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = j; i < m; ++i)
                cov(i, j) = cov(j, i) = cross_kernel(Channel::force, Channel::force, t_star[static_cast<std::size_t>(i)],
                                                     t_star[static_cast<std::size_t>(j)], kp, op);
        cov.noalias() -= v_full.transpose() * v_full;
        cov = 0.5 * (cov + cov.transpose()).eval();
        out.variance = cov.diagonal();
        out.cov = std::move(cov);
    }
    return out;
}

}  // namespace pigp
