#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "seiv/core.hpp"

namespace seiv {

enum class ClosureKind { Crude, Refined };

const char* to_string(ClosureKind k);

/// Per-node, per-compartment lower and upper probability bounds.
///
/// Storage is node-major with eight slots per node,
///   lo_S lo_E lo_I lo_V up_S up_E up_I up_V,
/// so that one node's bounds share a cache line.
class BoundsState {
public:
    static constexpr std::size_t kStride = 2 * kCompartments;

    BoundsState() = default;
    explicit BoundsState(std::size_t n) : v_(n * kStride, 0.0) {}

    /// Degenerate intervals at the indicator of x (lower = upper = X(0)).
    static BoundsState indicator(const SystemState& x);

    std::size_t size() const { return v_.size() / kStride; }

    double lower(std::size_t i, Compartment c) const { return v_[i * kStride + index(c)]; }
    double upper(std::size_t i, Compartment c) const { return v_[i * kStride + kCompartments + index(c)]; }
    double& lower(std::size_t i, Compartment c) { return v_[i * kStride + index(c)]; }
    double& upper(std::size_t i, Compartment c) { return v_[i * kStride + kCompartments + index(c)]; }

    std::span<double> data() { return v_; }
    std::span<const double> data() const { return v_; }

private:
    std::vector<double> v_;
};

struct BoundsSample {
    double time;
    BoundsState state;
};
using BoundsTrajectory = std::vector<BoundsSample>;

/// min{1 - upper_self, y}: caps an inflow so the receiving upper bound cannot pass one.
inline double complement_bound(double upper_self, double y) {
    const double slack = 1.0 - upper_self;
    return slack < y ? slack : y;
}

/// Right-hand side of the crude or refined bound dynamics for fixed (graph, params).
/// Edges whose exposure rates are both zero are dropped when the system is built.
class ClosureSystem {
public:
    ClosureSystem(ClosureKind kind, const SpreadingGraph& g, const SpreadingParams& p);

    ClosureKind kind() const { return kind_; }
    std::size_t size() const { return alpha_.size(); }
    std::size_t active_edges() const { return src_.size(); }

    void derivative(std::span<const double> x, std::span<double> dx) const;

    /// Restriction to the nodes in `keep` (ascending), re-indexed 0..keep.size()-1.
    /// Edges from dropped nodes are discarded.
    ClosureSystem restricted(std::span<const NodeId> keep) const;

private:
    ClosureSystem() = default;

    ClosureKind kind_ = ClosureKind::Refined;
    std::vector<double> alpha_, xi_, delta_, eta_;
    std::vector<std::uint32_t> offsets_;
    std::vector<std::uint32_t> src_;
    std::vector<double> beta_, gamma_;
};

/// Time-derivative of every bound under the crude Frechet closure.
BoundsState crude_rhs(const SpreadingGraph& g, const SpreadingParams& p, const BoundsState& state);
/// Time-derivative under the refined closure (complement-bounded inflows).
BoundsState refined_rhs(const SpreadingGraph& g, const SpreadingParams& p, const BoundsState& state);

struct IntegrationOptions {
    double step = 0.375 / 64.0;
    /// Tolerated lower/upper crossing or [0,1] leak before a NumericalError.
    double slack = 1e-6;
    /// Keep every grid point (true) or only the final state.
    bool record = true;
    /// Optional post-processing of each derivative evaluation (fault injection in the verifier).
    std::function<void(std::span<const double>, std::span<double>)> derivative_hook;
};

/// Integrates the bound dynamics from `start` for `duration` with fixed RK4 steps.
/// For the refined closure each step is followed by clamping to [0,1].
BoundsTrajectory integrate_bounds(const ClosureSystem& sys, const BoundsState& start, double duration,
                                  const IntegrationOptions& opts);

/// Bounds from lower = upper = indicator(x0) over [0, duration].
BoundsTrajectory integrate_bounds(ClosureKind kind, const SpreadingGraph& g, const SpreadingParams& p,
                                  const SystemState& x0, double duration, double step);

/// sum_i min{up_E + up_I, 1 - lo_S - lo_V}: the largest expected exposed+infected
/// count compatible with the intervals and row sums of one.
double optimal_exposed_infected_upper(const BoundsState& b);
/// sum_i (up_E + up_I).
double naive_exposed_infected_upper(const BoundsState& b);
/// sum_i max{lo_E + lo_I, 1 - up_S - up_V}.
double optimal_exposed_infected_lower(const BoundsState& b);

void write_bounds_csv(std::ostream& os, const BoundsTrajectory& traj);

} // namespace seiv
