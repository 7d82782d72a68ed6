#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "seiv/error.hpp"

namespace seiv {

/// Number of equal steps covering `duration` with steps no longer than `max_step`.
/// A ratio within 1e-9 of an integer is taken as that integer.
inline std::size_t step_count(double duration, double max_step) {
    if (!(max_step > 0.0) || !std::isfinite(max_step)) throw ValidationError("integration step must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ValidationError("duration must be >= 0");
    if (duration == 0.0) return 0;
    const double ratio = duration / max_step;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) && nearest >= 1.0) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(ratio));
}

/// Classical four-stage Runge-Kutta with a fixed step. Buffers are kept between
/// calls so repeated integrations of the same dimension do not allocate.
class Rk4 {
public:
    explicit Rk4(std::size_t dim = 0) { resize(dim); }

    void resize(std::size_t dim) {
        k1_.resize(dim);
        k2_.resize(dim);
        k3_.resize(dim);
        k4_.resize(dim);
        tmp_.resize(dim);
    }

    /// Advances x by one step h. `rhs(x, dx)` writes dx/dt into dx.
    template <class Rhs>
    void step(Rhs&& rhs, std::span<double> x, double h) {
        const std::size_t n = x.size();
        if (k1_.size() != n) resize(n);
        rhs(std::span<const double>(x), std::span<double>(k1_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k2_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k3_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k4_));
        const double w = h / 6.0;
        for (std::size_t i = 0; i < n; ++i) x[i] += w * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
    }

private:
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

} // namespace seiv
