#include "pigp/time_series.hpp"

#include <algorithm>
#include <cmath>

namespace pigp {

bool TimeSeries::same_grid(const TimeSeries& other, double tol) const {
    return size() == other.size() && std::abs(t0 - other.t0) <= tol * std::max(1.0, std::abs(t0)) &&
           std::abs(dt - other.dt) <= tol * dt;
}

double rms(const TimeSeries& x) {
    if (x.empty()) return 0.0;
    return std::sqrt(x.values.squaredNorm() / static_cast<double>(x.size()));
}

TimeSeries resample_linear(const TimeSeries& x, const TimeSeries& grid) {
    if (x.empty()) throw std::domain_error("resample_linear: empty source");
    Eigen::VectorXd out(grid.size());
    const Eigen::Index last = x.size() - 1;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double pos = (grid.time(i) - x.t0) / x.dt;
        if (pos <= 0.0) {
            out[i] = x.values[0];
        } else if (pos >= static_cast<double>(last)) {
            out[i] = x.values[last];
        } else {
            const auto k = static_cast<Eigen::Index>(std::floor(pos));
            const double w = pos - static_cast<double>(k);
            out[i] = (1.0 - w) * x.values[k] + w * x.values[k + 1];
        }
    }
    return {grid.t0, grid.dt, std::move(out)};
}

}  // namespace pigp
