#include "pigp/fft.hpp"

#include <unsupported/Eigen/FFT>

namespace pigp::fft {

Spectrum forward(const Eigen::VectorXd& x) {
    Eigen::FFT<double> engine;
    std::vector<double> in(x.data(), x.data() + x.size());
    Spectrum out;
    engine.fwd(out, in);
    return out;
}

Spectrum inverse(const Spectrum& spectrum) {
    Eigen::FFT<double> engine;
    Spectrum out;
    engine.inv(out, spectrum);
    return out;
}

Eigen::VectorXd inverse_real(const Spectrum& spectrum) {
    const Spectrum c = inverse(spectrum);
    Eigen::VectorXd out(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) out[static_cast<Eigen::Index>(i)] = c[i].real();
    return out;
}

double bin_frequency(Eigen::Index k, Eigen::Index n, double dt) {
    const Eigen::Index signed_k = (k <= n / 2) ? k : k - n;
    return static_cast<double>(signed_k) / (static_cast<double>(n) * dt);
}

}  // namespace pigp::fft
