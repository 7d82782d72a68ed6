#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "seiv/rng.hpp"

namespace seiv {

/// l0 e^{-r t}.
double decay_envelope(double ell0, double r, double t);

/// ceil(ln(l0) / (r dt)) dt, with tau_one(0) = 0.
double tau_one(double ell0, double r, double dt);

/// tau_1 + e^{-r tau_1} / (1 - e^{-r dt}) * dt * l0.
double elimination_time_bound(double ell0, double r, double dt);

/// min{1, l0 e^{-r floor(t/dt) dt}}.
double survival_bound(double ell0, double r, double dt, double t);

struct Interval {
    double lo;
    double hi;
};

/// Percentile bootstrap interval for the mean.
Interval bootstrap_mean_ci(std::span<const double> samples, double level, std::size_t resamples, Rng& rng);

/// Standard deviation of the bootstrap distribution of the mean.
double bootstrap_standard_error(std::span<const double> samples, std::size_t resamples, Rng& rng);

double mean(std::span<const double> samples);

struct EliminationStats {
    std::vector<double> elimination_times;
    double mean = 0.0;
    double bound = 0.0;

    static EliminationStats from(std::vector<double> times, double ell0, double r, double dt);
};

/// {"tau_one", "elim_bound", "empirical_mean", "ci": [lo, hi]}.
nlohmann::json elimination_report(const EliminationStats& stats, double ell0, double r, double dt, Interval ci);

} // namespace seiv
