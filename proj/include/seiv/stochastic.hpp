#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "seiv/core.hpp"
#include "seiv/rng.hpp"

namespace seiv {

struct TransitionEvent {
    double time;
    NodeId node;
    Compartment from;
    Compartment to;
    friend bool operator==(const TransitionEvent&, const TransitionEvent&) = default;
};

/// True for the five arcs of the SEIV diagram: S->E, S->V, E->I, I->V, V->S.
bool is_allowed_transition(Compartment from, Compartment to);

/// A sample path: the initial state plus every jump in time order.
struct EventTrajectory {
    SystemState initial;
    std::vector<TransitionEvent> events;

    /// State just after all events with time <= t.
    SystemState state_at(double t) const;
    SystemState final_state() const;
    /// Checks strictly increasing times, `from` consistency and allowed arcs.
    bool is_consistent() const;
    /// l(X(k dt)) for k = 0..count-1.
    std::vector<std::size_t> exposed_infected_at_samples(double dt, std::size_t count) const;
    /// Time at which l first reaches zero (0 for a disease-free start), or -1.
    double elimination_time() const;
};

/// Jump intensities out of the current state, rate[i][target].
struct RateTable {
    std::vector<std::array<double, kCompartments>> rate;

    double operator()(std::size_t i, Compartment target) const { return rate[i][index(target)]; }
    double node_total(std::size_t i) const;
    double total() const;
};

RateTable transition_rates(const SpreadingGraph& g, const SpreadingParams& p, const SystemState& x);

/// Piecewise-constant parameters: segment k applies on [start_k, start_{k+1}).
/// The first segment must start at 0.
class ParamsSchedule {
public:
    explicit ParamsSchedule(SpreadingParams constant);
    ParamsSchedule(std::vector<std::pair<double, SpreadingParams>> segments);

    const SpreadingParams& at(double t) const;
    std::size_t segment_count() const { return segments_.size(); }
    double segment_start(std::size_t k) const { return segments_[k].first; }
    const SpreadingParams& segment_params(std::size_t k) const { return segments_[k].second; }

private:
    std::vector<std::pair<double, SpreadingParams>> segments_;
};

/// Incremental Gillespie direct-method driver. Holds the current state and
/// node rates; `advance` runs the chain up to a target time under fixed
/// parameters. Pending clocks are discarded at the target time, which is exact
/// for exponential holding times.
class GillespieProcess {
public:
    GillespieProcess(const SpreadingGraph& g, SystemState x0, double t0 = 0.0);

    /// Runs to `t_end` under `p`, appending events to `out` (may be null).
    /// Returns the number of events fired.
    std::size_t advance(const SpreadingParams& p, double t_end, Rng& rng, std::vector<TransitionEvent>* out);

    const SystemState& state() const { return state_; }
    double time() const { return time_; }
    std::size_t exposed_infected() const { return ell_; }
    /// Time at which the exposed+infected count last dropped to zero, or -1
    /// while the process is not disease-free.
    double elimination_time() const { return elimination_time_; }

private:
    void recompute_node(NodeId i, const SpreadingParams& p);

    const SpreadingGraph* g_;
    SystemState state_;
    double time_;
    std::size_t ell_;
    double elimination_time_;
    std::vector<double> pressure_; // exposure intensity on node i, used when i is S
    std::vector<double> node_rate_;
};

/// Exact realisation of the process on [0, horizon].
EventTrajectory simulate_path(const SpreadingGraph& g, const ParamsSchedule& schedule, const SystemState& x0,
                              double horizon, Rng& rng);

/// Forward (master) equation on the full 4^n joint chain. Joint state index is
/// base-4 with node i contributing digit(i) * 4^i and digits S=0, E=1, I=2, V=3.
class MasterEquation {
public:
    static constexpr std::size_t kMaxNodes = 8;

    MasterEquation(const SpreadingGraph& g, const SpreadingParams& p);

    std::size_t state_count() const { return exit_rate_.size(); }
    /// Largest total exit rate over joint states.
    double max_exit_rate() const;
    static std::size_t encode(const SystemState& x);
    static SystemState decode(std::size_t index, std::size_t n);

    /// dp/dt for the joint distribution p.
    void derivative(std::span<const double> p, std::span<double> dp) const;
    /// Integrates p forward by `duration` with RK4 steps no longer than `max_step`.
    void propagate(std::vector<double>& p, double duration, double max_step) const;
    MarginalVector marginals(std::span<const double> p) const;

private:
    std::size_t n_;
    std::vector<double> exit_rate_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> to_;
    std::vector<double> rate_;
};

inline constexpr double kDefaultOracleStep = 1.0 / 256.0;
/// The oracle also keeps step * max_exit_rate below this, so the RK4 error
/// stays near 1e-9 per step on fast modes.
inline constexpr double kOracleRateStep = 0.05;

/// Exact marginals at each requested time (sorted, >= 0). Throws CapacityError for n > 8.
std::vector<MarginalVector> master_equation_marginals(const SpreadingGraph& g, const SpreadingParams& p,
                                                      const SystemState& x0, std::span<const double> times,
                                                      double max_step = kDefaultOracleStep);

struct MonteCarloMarginals {
    std::vector<MarginalVector> mean;
    /// Binomial standard error sqrt(p(1-p)/trials) per entry.
    std::vector<MarginalVector> std_error;
};

MonteCarloMarginals monte_carlo_marginals(const SpreadingGraph& g, const ParamsSchedule& schedule,
                                          const SystemState& x0, std::span<const double> times,
                                          std::size_t trials, Rng& rng);

void write_trajectory_csv(std::ostream& os, const EventTrajectory& traj);

} // namespace seiv
