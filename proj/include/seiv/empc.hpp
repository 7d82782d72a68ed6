#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "seiv/closure.hpp"
#include "seiv/core.hpp"
#include "seiv/rng.hpp"
#include "seiv/stochastic.hpp"

namespace seiv {

/// Binary quarantine vector; entry i = 1 removes node i's outgoing edges.
class Action {
public:
    Action() = default;
    explicit Action(std::size_t n) : q_(n, 0) {}
    explicit Action(std::vector<std::uint8_t> q);

    static Action zeros(std::size_t n) { return Action(n); }
    static Action ones(std::size_t n) { return Action(std::vector<std::uint8_t>(n, 1)); }

    std::size_t size() const { return q_.size(); }
    bool operator[](std::size_t i) const { return q_[i] != 0; }
    void set(std::size_t i, bool on) { q_[i] = on ? 1 : 0; }
    std::size_t count() const;
    /// Compact "0110..." form; also the memoisation key.
    std::string to_string() const;

    friend bool operator==(const Action&, const Action&) = default;

private:
    std::vector<std::uint8_t> q_;
};

/// The action-to-parameters map and action cost. Quarantine is the only model
/// shipped; others plug in here.
class ActionModel {
public:
    virtual ~ActionModel() = default;
    virtual SpreadingParams parameters(const Action& a) const = 0;
    virtual double cost(const Action& a) const = 0;
};

/// beta_ij(a) = beta_ij (1 - a_j), gamma_ij(a) = gamma_ij (1 - a_j); other rates unchanged.
class QuarantineMap final : public ActionModel {
public:
    QuarantineMap(const SpreadingGraph& g, SpreadingParams base);

    SpreadingParams parameters(const Action& a) const override;
    double cost(const Action& a) const override;

    const SpreadingGraph& graph() const { return *g_; }
    const SpreadingParams& base() const { return base_; }

private:
    const SpreadingGraph* g_;
    SpreadingParams base_;
};

SpreadingParams apply_action(const QuarantineMap& map, const Action& a);
/// Number of quarantined nodes.
double action_cost(const Action& a);

enum class Policy { Empc, TotalQuarantine };

struct ControllerConfig {
    double r = 0.07;        // target decay rate
    double dt = 0.375;      // sampling interval
    double horizon = 100.0; // total control duration
    std::size_t k_max = 8;  // multistart samples per decision
    std::size_t step_divisor = 64; // integrator step = dt / step_divisor
    std::uint64_t seed = 1;
    bool early_stop = true;     // stop at the first sampling time with no E/I node
    bool record_bounds = false; // keep the chosen action's bound trace per interval
    double slack = 1e-6;        // integrator slack on bound invariants
    Policy policy = Policy::Empc;

    double integrator_step() const { return dt / static_cast<double>(step_divisor); }
    void validate() const;
};

/// Breakdown of one stability-constraint evaluation.
struct MarginEvaluation {
    double margin;      // bound - target; feasible iff <= 0
    double bound;       // robust upper bound on E[l(X(t+dt)) | X(t)]
    double target;      // l(X(t)) e^{-r dt}
    std::size_t integrated_nodes; // nodes that can carry E/I mass under the action
};

/// Robust surrogate of the stability constraint for fixed spreading parameters.
MarginEvaluation evaluate_margin(const SpreadingGraph& g, const SpreadingParams& params, const SystemState& x,
                                 const ControllerConfig& cfg);

double stability_margin(const SpreadingGraph& g, const QuarantineMap& map, const Action& a, const SystemState& x,
                        const ControllerConfig& cfg);

/// Quarantines exactly the exposed and infected nodes.
Action total_quarantine_policy(const SystemState& x);

/// Smallest sampling interval for which total quarantine is guaranteed feasible:
/// max_i [ln max{delta_i, eta_i} - ln |eta_i - delta_i|] / (min{delta_i, eta_i} - r).
double min_sampling_interval(const SpreadingParams& p, double r);

struct QuarantineBounds {
    double exposed;
    double exposed_plus_infected;
};

/// Closed-form E/I upper bounds of a fully quarantined node after time t.
QuarantineBounds analytic_quarantine_bounds(double delta, double eta, double xE0, double xI0, double t);

inline constexpr double kQuarantineProbabilityActive = 0.9;
inline constexpr double kQuarantineProbabilityIdle = 0.1;

/// Independent Bernoulli per node: 0.9 for exposed/infected nodes, 0.1 otherwise.
Action sample_candidate_action(const SystemState& x, Rng& rng);

struct DescentStats {
    std::size_t samples = 0;
    std::size_t feasible_samples = 0;
    std::size_t margin_evaluations = 0; // distinct actions evaluated
    std::size_t cache_hits = 0;
    std::vector<std::size_t> descent_queries; // feasibility queries per local descent
};

struct DescentResult {
    Action action;
    double cost;
    double margin;
    Action auxiliary;
    double auxiliary_cost;
    double auxiliary_margin;
    DescentStats stats;
};

/// Feasibility oracle: returns the stability margin of an action.
using MarginOracle = std::function<double(const Action&)>;

/// Multi-start local descent. Candidates start with the total-quarantine action;
/// each of k_max samples, if feasible, is stripped one quarantined node at a
/// time (lowest index first) while it stays feasible. Returns the cheapest
/// candidate; ties keep the earliest.
DescentResult multistart_local_descent(const SystemState& x, std::size_t k_max, const ActionModel& model,
                                       const MarginOracle& margin, Rng& rng);

DescentResult multistart_local_descent(const SpreadingGraph& g, const QuarantineMap& map, const SystemState& x,
                                       const ControllerConfig& cfg, Rng& rng);

struct Decision {
    double time;
    std::size_t exposed_infected;
    Action action;
    double cost;
    double baseline_cost; // cost of total quarantine at the same state
    double margin;
    double bound;         // optimal E/I upper bound at t + dt under the chosen action
    std::size_t descent_max_queries;
};

struct ClosedLoopRecord {
    EventTrajectory trajectory;
    std::vector<Decision> decisions;
    std::vector<BoundsTrajectory> bound_traces; // only with cfg.record_bounds
    double elimination_time = -1.0;            // -1 if not eliminated by the end
    double end_time = 0.0;

    bool eliminated() const { return elimination_time >= 0.0; }
    /// l(X(k dt)) for k = 0..count-1; zero after elimination.
    std::vector<std::size_t> exposed_infected_at_samples(double dt, std::size_t count) const;
};

/// Closed loop: at each sampling time observe the state, choose an action,
/// and run the exact process under it until the next sampling time.
ClosedLoopRecord run_closed_loop(const SpreadingGraph& g, const QuarantineMap& map, const SystemState& x0,
                                 const ControllerConfig& cfg, Rng& rng);

/// Writes <prefix>.json plus <prefix>_trajectory.csv, <prefix>_actions.csv and,
/// when present, <prefix>_bounds.csv.
void write_closed_loop(const std::filesystem::path& dir, const std::string& prefix, const ClosedLoopRecord& rec);

} // namespace seiv
