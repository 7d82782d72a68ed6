#include "seiv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seiv/error.hpp"

namespace seiv {

namespace {

constexpr double kGridSnap = 1e-9;

// Integer part of a ratio that should land on a grid point, tolerant to rounding.
double snapped(double q, double (*round_fn)(double)) {
    const double nearest = std::round(q);
    if (std::abs(q - nearest) <= kGridSnap * std::max(1.0, std::abs(q))) return nearest;
    return round_fn(q);
}

void check_rate(double r, double dt) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("r must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be > 0");
}

void check_ell(double ell0) {
    if (!(ell0 >= 0.0) || !std::isfinite(ell0)) throw ValidationError("ell0 must be >= 0");
}

double quantile(std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(k);
    return sorted[k] + w * (sorted[k + 1] - sorted[k]);
}

std::vector<double> resampled_means(std::span<const double> samples, std::size_t resamples, Rng& rng) {
    if (samples.empty()) throw ValidationError("bootstrap: samples must be non-empty");
    if (resamples == 0) throw ValidationError("bootstrap: resamples must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    std::vector<double> means(resamples);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) s += samples[pick(rng)];
        m = s / static_cast<double>(samples.size());
    }
    return means;
}

} // namespace

double decay_envelope(double ell0, double r, double t) {
    check_ell(ell0);
    return ell0 * std::exp(-r * t);
}

double tau_one(double ell0, double r, double dt) {
    check_ell(ell0);
    check_rate(r, dt);
    if (ell0 == 0.0) return 0.0;
    if (ell0 < 1.0) throw ValidationError("tau_one: ell0 must be 0 or >= 1");
    return snapped(std::log(ell0) / (r * dt), static_cast<double (*)(double)>(std::ceil)) * dt;
}

double elimination_time_bound(double ell0, double r, double dt) {
    const double t1 = tau_one(ell0, r, dt);
    return t1 + std::exp(-r * t1) / (1.0 - std::exp(-r * dt)) * dt * ell0;
}

double survival_bound(double ell0, double r, double dt, double t) {
    check_ell(ell0);
    check_rate(r, dt);
    if (!(t >= 0.0)) throw ValidationError("survival_bound: t must be >= 0");
    const double k = snapped(t / dt, static_cast<double (*)(double)>(std::floor));
    return std::min(1.0, ell0 * std::exp(-r * k * dt));
}

double mean(std::span<const double> samples) {
    if (samples.empty()) throw ValidationError("mean of an empty sample");
    return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

Interval bootstrap_mean_ci(std::span<const double> samples, double level, std::size_t resamples, Rng& rng) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("bootstrap: level must lie in (0,1)");
    auto means = resampled_means(samples, resamples, rng);
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile(means, tail), quantile(means, 1.0 - tail)};
}

double bootstrap_standard_error(std::span<const double> samples, std::size_t resamples, Rng& rng) {
    const auto means = resampled_means(samples, resamples, rng);
    if (means.size() < 2) return 0.0;
    const double m = mean(means);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(means.size() - 1));
}

EliminationStats EliminationStats::from(std::vector<double> times, double ell0, double r, double dt) {
    for (double t : times) {
        if (!(t >= 0.0)) throw ValidationError("elimination times must be >= 0");
    }
    EliminationStats s;
    s.mean = times.empty() ? 0.0 : seiv::mean(times);
    s.elimination_times = std::move(times);
    s.bound = elimination_time_bound(ell0, r, dt);
    return s;
}

nlohmann::json elimination_report(const EliminationStats& stats, double ell0, double r, double dt, Interval ci) {
    return {{"tau_one", tau_one(ell0, r, dt)},
            {"elim_bound", stats.bound},
            {"empirical_mean", stats.mean},
            {"ci", {ci.lo, ci.hi}}};
}

} // namespace seiv
