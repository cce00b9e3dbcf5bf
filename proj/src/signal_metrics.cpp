#include "pigp/signal_metrics.hpp"

#include "pigp/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace pigp {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd hann(Eigen::Index n) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / n));
    return w;
}

struct Segmenting {
    Eigen::Index len;
    Eigen::Index step;
    Eigen::Index count;
};

Segmenting segmenting(Eigen::Index total, Eigen::Index segment_len, double overlap) {
    if (segment_len < 2) throw std::domain_error("welch: segment length must be at least 2");
    if (total < segment_len) throw std::domain_error("welch: signal shorter than one segment");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw std::domain_error("welch: overlap must lie in [0, 1)");
    const auto shared = static_cast<Eigen::Index>(std::llround(overlap * static_cast<double>(segment_len)));
    const Eigen::Index step = std::max<Eigen::Index>(1, segment_len - shared);
    return {segment_len, step, (total - segment_len) / step + 1};
}

// Averaged one-sided cross periodogram conj(X) Y, density-scaled.
Eigen::VectorXcd welch_cross(const TimeSeries& x, const TimeSeries& y, const Segmenting& seg) {
    const Eigen::VectorXd w = hann(seg.len);
    const double fs = 1.0 / x.dt;
    const double scale = 1.0 / (fs * w.squaredNorm() * static_cast<double>(seg.count));
    const Eigen::Index bins = seg.len / 2 + 1;
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(bins);
    for (Eigen::Index s = 0; s < seg.count; ++s) {
        const Eigen::Index start = s * seg.step;
        const auto fx = fft::forward(x.values.segment(start, seg.len).cwiseProduct(w));
        const auto fy = &x == &y ? fx : fft::forward(y.values.segment(start, seg.len).cwiseProduct(w));
        for (Eigen::Index k = 0; k < bins; ++k)
            acc[k] += std::conj(fx[static_cast<std::size_t>(k)]) * fy[static_cast<std::size_t>(k)];
    }
    acc *= scale;
    const Eigen::Index last_doubled = (seg.len % 2 == 0) ? bins - 2 : bins - 1;
    for (Eigen::Index k = 1; k <= last_doubled; ++k) acc[k] *= 2.0;
    return acc;
}

Eigen::VectorXd bin_freqs(Eigen::Index segment_len, double dt) {
    const Eigen::Index bins = segment_len / 2 + 1;
    Eigen::VectorXd f(bins);
    for (Eigen::Index k = 0; k < bins; ++k) f[k] = static_cast<double>(k) / (static_cast<double>(segment_len) * dt);
    return f;
}

Eigen::VectorXcd analytic(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    auto spec = fft::forward(x);
    for (Eigen::Index k = 1; k < n; ++k) {
        const bool positive = (n % 2 == 0) ? k < n / 2 : k <= (n - 1) / 2;
        const bool nyquist = (n % 2 == 0) && k == n / 2;
        if (positive)
            spec[static_cast<std::size_t>(k)] *= 2.0;
        else if (!nyquist)
            spec[static_cast<std::size_t>(k)] = 0.0;
    }
    const auto z = fft::inverse(spec);
    return Eigen::Map<const Eigen::VectorXcd>(z.data(), n);
}

double interior_mean(const Eigen::VectorXd& v, double edge_fraction) {
    const auto n = v.size();
    const auto skip = static_cast<Eigen::Index>(std::floor(edge_fraction * static_cast<double>(n)));
    const Eigen::Index len = n - 2 * skip;
    if (len <= 0) throw std::domain_error("compare_signals: edge exclusion leaves no samples");
    return v.segment(skip, len).mean();
}

}  // namespace

double PsdEstimate::at(double f) const {
    if (freqs.size() == 0) throw std::domain_error("PsdEstimate: empty");
    const double d = df();
    const auto k = d > 0.0 ? static_cast<Eigen::Index>(std::llround((f - freqs[0]) / d)) : 0;
    return psd[std::clamp<Eigen::Index>(k, 0, psd.size() - 1)];
}

double PsdEstimate::band_mean(double lo, double hi) const {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index k = 0; k < freqs.size(); ++k)
        if (freqs[k] >= lo && freqs[k] <= hi) {
            sum += psd[k];
            ++count;
        }
    if (count == 0) throw std::domain_error("PsdEstimate: no bins inside the requested band");
    return sum / count;
}

PsdEstimate welch_psd(const TimeSeries& x, Eigen::Index segment_len, double overlap) {
    const auto seg = segmenting(x.size(), segment_len, overlap);
    return {bin_freqs(segment_len, x.dt), welch_cross(x, x, seg).real()};
}

PsdEstimate welch_coherence(const TimeSeries& x, const TimeSeries& y, Eigen::Index segment_len, double overlap) {
    if (!x.same_grid(y)) throw std::domain_error("welch_coherence: signals must share a grid");
    const auto seg = segmenting(x.size(), segment_len, overlap);
    const Eigen::VectorXd sxx = welch_cross(x, x, seg).real();
    const Eigen::VectorXd syy = welch_cross(y, y, seg).real();
    const Eigen::VectorXcd sxy = welch_cross(x, y, seg);
    Eigen::VectorXd coh(sxy.size());
    for (Eigen::Index k = 0; k < coh.size(); ++k) {
        const double denom = std::sqrt(sxx[k] * syy[k]);
        coh[k] = denom > 0.0 ? std::min(1.0, std::abs(sxy[k]) / denom) : 0.0;
    }
    return {bin_freqs(segment_len, x.dt), coh};
}

AnalyticSignal analytic_signal(const TimeSeries& x) {
    if (x.size() < 8) throw std::domain_error("analytic_signal: at least 8 samples required");
    const Eigen::VectorXcd z = analytic(x.values);
    Eigen::VectorXd env = z.cwiseAbs();
    Eigen::VectorXd phase(z.size());
    double offset = 0.0, prev = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double raw = std::arg(z[i]);
        if (i > 0) {
            const double jump = raw - prev;
            if (jump > kPi) offset -= 2.0 * kPi;
            if (jump < -kPi) offset += 2.0 * kPi;
        }
        prev = raw;
        phase[i] = raw + offset;
    }
    return {{x.t0, x.dt, std::move(env)}, {x.t0, x.dt, std::move(phase)}};
}

TimeSeries bandpass(const TimeSeries& x, double f_lo, double f_hi) {
    if (!(f_lo >= 0.0) || !(f_hi > f_lo)) throw std::domain_error("bandpass: need 0 <= f_lo < f_hi");
    auto spec = fft::forward(x.values);
    const Eigen::Index n = x.size();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double f = std::abs(fft::bin_frequency(k, n, x.dt));
        if (f < f_lo || f > f_hi) spec[static_cast<std::size_t>(k)] = 0.0;
    }
    return {x.t0, x.dt, fft::inverse_real(spec)};
}

MetricReport compare_signals(const TimeSeries& truth, const TimeSeries& pred_in, const CompareOptions& options) {
    if (truth.size() < 8) throw std::domain_error("compare_signals: truth too short");
    const TimeSeries pred = truth.same_grid(pred_in) ? pred_in : resample_linear(pred_in, truth);
    const double rms_t = rms(truth);
    if (!(rms_t > 0.0)) throw std::domain_error("compare_signals: truth has zero RMS");

    MetricReport r;
    r.m_rms = std::exp(-std::abs(rms(pred) - rms_t) / rms_t);

    const double peak_t = truth.values.cwiseAbs().maxCoeff();
    const double peak_p = pred.values.cwiseAbs().maxCoeff();
    r.m_peak = std::exp(-std::abs(peak_p - peak_t) / peak_t);

    const Eigen::VectorXd env_t = analytic(truth.values).cwiseAbs();
    const Eigen::VectorXd env_p = analytic(pred.values).cwiseAbs();
    const double mean_env = interior_mean(env_t, options.edge_fraction);
    r.m_mag = std::exp(-interior_mean((env_p - env_t).cwiseAbs(), options.edge_fraction) / mean_env);

    Eigen::VectorXd xt = truth.values, xp = pred.values;
    if (options.phase_band) {
        xt = bandpass(truth, options.phase_band->first, options.phase_band->second).values;
        xp = bandpass(pred, options.phase_band->first, options.phase_band->second).values;
    }
    const Eigen::VectorXcd zt = analytic(xt), zp = analytic(xp);
    Eigen::VectorXd dphi(zt.size());
    for (Eigen::Index i = 0; i < zt.size(); ++i) dphi[i] = std::abs(std::arg(zp[i] * std::conj(zt[i])));
    r.m_phase = std::exp(-interior_mean(dphi, options.edge_fraction) / kPi);
    return r;
}

}  // namespace pigp
