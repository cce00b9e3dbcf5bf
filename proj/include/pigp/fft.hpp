#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

namespace pigp::fft {

using Spectrum = std::vector<std::complex<double>>;

/// Full-length DFT of a real signal, X[k] = sum_n x[n] exp(-2 pi i k n / N).
Spectrum forward(const Eigen::VectorXd& x);

/// Real part of the inverse DFT (1/N normalization) of a full-length spectrum.
Eigen::VectorXd inverse_real(const Spectrum& spectrum);

/// Complex inverse DFT (1/N normalization).
Spectrum inverse(const Spectrum& spectrum);

/// Frequency in Hz of DFT bin k for N samples at spacing dt; bins above N/2
/// map to negative frequencies.
double bin_frequency(Eigen::Index k, Eigen::Index n, double dt);

}  // namespace pigp::fft
