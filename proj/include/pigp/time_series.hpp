#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <utility>

namespace pigp {

/// Uniformly sampled scalar signal starting at t0.
struct TimeSeries {
    double t0 = 0.0;
    double dt = 1.0;
    Eigen::VectorXd values;

    TimeSeries() = default;
    TimeSeries(double t0_, double dt_, Eigen::VectorXd values_)
        : t0(t0_), dt(dt_), values(std::move(values_)) {
        if (!(dt > 0.0)) throw std::domain_error("TimeSeries: dt must be positive");
    }

    [[nodiscard]] Eigen::Index size() const { return values.size(); }
    [[nodiscard]] bool empty() const { return values.size() == 0; }
    [[nodiscard]] double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * dt; }
    [[nodiscard]] double t_end() const { return time(values.size() - 1); }
    [[nodiscard]] Eigen::VectorXd times() const {
        return Eigen::VectorXd::LinSpaced(values.size(), t0, t_end());
    }
    [[nodiscard]] bool same_grid(const TimeSeries& other, double tol = 1e-9) const;
};

/// Root mean square of the samples.
double rms(const TimeSeries& x);

/// Linear interpolation of `x` onto the grid of `grid`; values outside the
/// source span are clamped to the end samples.
TimeSeries resample_linear(const TimeSeries& x, const TimeSeries& grid);

}  // namespace pigp
