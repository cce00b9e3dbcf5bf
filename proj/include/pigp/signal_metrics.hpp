#pragma once

#include "pigp/time_series.hpp"

#include <Eigen/Core>

#include <optional>
#include <utility>

namespace pigp {

/// One-sided power spectral density on an ascending frequency grid.
struct PsdEstimate {
    Eigen::VectorXd freqs;  ///< Hz
    Eigen::VectorXd psd;    ///< units²/Hz

    [[nodiscard]] double df() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
    /// Rectangle-rule integral of the density, i.e. the estimated variance.
    [[nodiscard]] double total_power() const { return psd.sum() * df(); }
    /// Density of the bin nearest to `f`.
    [[nodiscard]] double at(double f) const;
    /// Mean density over bins with lo <= f <= hi.
    [[nodiscard]] double band_mean(double lo, double hi) const;
};

/// Hann-windowed averaged periodogram (Welch), density scaling, no detrending.
/// `overlap` is the fraction of a segment shared with its neighbour.
PsdEstimate welch_psd(const TimeSeries& x, Eigen::Index segment_len, double overlap = 0.5);

/// Welch estimate of the root coherence |S_xy| / sqrt(S_xx S_yy) per frequency.
PsdEstimate welch_coherence(const TimeSeries& x, const TimeSeries& y, Eigen::Index segment_len,
                            double overlap = 0.5);

/// Instantaneous envelope and unwrapped phase from the FFT-based analytic signal.
struct AnalyticSignal {
    TimeSeries envelope;
    TimeSeries phase;
};

AnalyticSignal analytic_signal(const TimeSeries& x);

/// Zero-phase band-pass by masking DFT bins outside [f_lo, f_hi].
TimeSeries bandpass(const TimeSeries& x, double f_lo, double f_hi);

/// Normalized similarity scores in [0, 1]; 1 means the property matches exactly.
/// These are exp(-normalized discrepancy) surrogates, not the wavelet-based
/// definitions of the original metric suite.
struct MetricReport {
    double m_rms = 0.0;
    double m_mag = 0.0;
    double m_phase = 0.0;
    double m_peak = 0.0;
};

struct CompareOptions {
    /// Band [lo, hi] Hz applied before extracting instantaneous phase; the
    /// pipeline uses [0.25 f_n, 4 f_n] of the mode under test.
    std::optional<std::pair<double, double>> phase_band;
    /// Fraction of samples dropped at each end for the envelope/phase averages.
    double edge_fraction = 0.1;
};

/// Scores `pred` against `truth`. `pred` is linearly resampled onto the truth
/// grid when the grids differ.
MetricReport compare_signals(const TimeSeries& truth, const TimeSeries& pred, const CompareOptions& options = {});

}  // namespace pigp
