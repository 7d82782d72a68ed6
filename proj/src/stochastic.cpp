#include "seiv/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "seiv/error.hpp"
#include "seiv/integrator.hpp"
#include "seiv/io.hpp"

namespace seiv {

bool is_allowed_transition(Compartment from, Compartment to) {
    using C = Compartment;
    return (from == C::S && (to == C::E || to == C::V)) || (from == C::E && to == C::I) ||
           (from == C::I && to == C::V) || (from == C::V && to == C::S);
}

SystemState EventTrajectory::state_at(double t) const {
    SystemState x = initial;
    for (const auto& ev : events) {
        if (ev.time > t) break;
        x[ev.node] = ev.to;
    }
    return x;
}

SystemState EventTrajectory::final_state() const {
    SystemState x = initial;
    for (const auto& ev : events) x[ev.node] = ev.to;
    return x;
}

std::vector<std::size_t> EventTrajectory::exposed_infected_at_samples(double dt, std::size_t count) const {
    std::vector<std::size_t> out(count, 0);
    std::size_t ell = exposed_infected_count(initial);
    std::size_t next = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = dt * static_cast<double>(k);
        for (; next < events.size() && events[next].time <= t; ++next) {
            if (events[next].from == Compartment::S && events[next].to == Compartment::E) ++ell;
            if (events[next].from == Compartment::I) --ell;
        }
        out[k] = ell;
    }
    return out;
}

double EventTrajectory::elimination_time() const {
    std::size_t ell = exposed_infected_count(initial);
    if (ell == 0) return 0.0;
    for (const auto& ev : events) {
        if (ev.from == Compartment::S && ev.to == Compartment::E) ++ell;
        if (ev.from == Compartment::I && --ell == 0) return ev.time;
    }
    return -1.0;
}

bool EventTrajectory::is_consistent() const {
    SystemState x = initial;
    double last = -1.0;
    for (const auto& ev : events) {
        if (!(ev.time > last) || ev.time < 0.0) return false;
        if (ev.node >= x.size() || x[ev.node] != ev.from) return false;
        if (!is_allowed_transition(ev.from, ev.to)) return false;
        x[ev.node] = ev.to;
        last = ev.time;
    }
    return true;
}

double RateTable::node_total(std::size_t i) const {
    const auto& r = rate[i];
    return r[0] + r[1] + r[2] + r[3];
}

double RateTable::total() const {
    double s = 0.0;
    for (std::size_t i = 0; i < rate.size(); ++i) s += node_total(i);
    return s;
}

namespace {

double exposure_pressure(const SpreadingGraph& g, const SpreadingParams& p, const SystemState& x, NodeId i) {
    double s = 0.0;
    auto nb = g.in_neighbors(i);
    const auto base = g.in_begin(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto cj = x[nb[k]];
        if (cj == Compartment::E) s += p.beta[base + k];
        else if (cj == Compartment::I) s += p.gamma[base + k];
    }
    return s;
}

void check_dimensions(const SpreadingGraph& g, const SpreadingParams& p, const SystemState& x) {
    if (x.size() != g.size()) {
        throw ValidationError("state has " + std::to_string(x.size()) + " nodes, graph has " +
                              std::to_string(g.size()));
    }
    p.validate(g);
}

} // namespace

RateTable transition_rates(const SpreadingGraph& g, const SpreadingParams& p, const SystemState& x) {
    check_dimensions(g, p, x);
    RateTable t;
    t.rate.assign(g.size(), {0.0, 0.0, 0.0, 0.0});
    for (NodeId i = 0; i < g.size(); ++i) {
        auto& r = t.rate[i];
        switch (x[i]) {
        case Compartment::S:
            r[index(Compartment::E)] = exposure_pressure(g, p, x, i);
            r[index(Compartment::V)] = p.xi[i];
            break;
        case Compartment::E: r[index(Compartment::I)] = p.delta[i]; break;
        case Compartment::I: r[index(Compartment::V)] = p.eta[i]; break;
        case Compartment::V: r[index(Compartment::S)] = p.alpha[i]; break;
        }
    }
    return t;
}

ParamsSchedule::ParamsSchedule(SpreadingParams constant) { segments_.emplace_back(0.0, std::move(constant)); }

ParamsSchedule::ParamsSchedule(std::vector<std::pair<double, SpreadingParams>> segments)
    : segments_(std::move(segments)) {
    if (segments_.empty() || segments_.front().first != 0.0) {
        throw ValidationError("parameter schedule must start at time 0");
    }
    for (std::size_t k = 1; k < segments_.size(); ++k) {
        if (!(segments_[k].first > segments_[k - 1].first)) {
            throw ValidationError("parameter schedule breakpoints must be strictly increasing");
        }
    }
}

const SpreadingParams& ParamsSchedule::at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const auto& seg) { return v < seg.first; });
    return std::prev(it)->second;
}

GillespieProcess::GillespieProcess(const SpreadingGraph& g, SystemState x0, double t0)
    : g_(&g), state_(std::move(x0)), time_(t0), ell_(exposed_infected_count(state_)),
      elimination_time_(ell_ == 0 ? t0 : -1.0), pressure_(g.size(), 0.0), node_rate_(g.size(), 0.0) {
    if (state_.size() != g.size()) throw ValidationError("initial state does not match graph size");
}

void GillespieProcess::recompute_node(NodeId i, const SpreadingParams& p) {
    switch (state_[i]) {
    case Compartment::S:
        pressure_[i] = exposure_pressure(*g_, p, state_, i);
        node_rate_[i] = pressure_[i] + p.xi[i];
        break;
    case Compartment::E: node_rate_[i] = p.delta[i]; break;
    case Compartment::I: node_rate_[i] = p.eta[i]; break;
    case Compartment::V: node_rate_[i] = p.alpha[i]; break;
    }
}

std::size_t GillespieProcess::advance(const SpreadingParams& p, double t_end, Rng& rng,
                                      std::vector<TransitionEvent>* out) {
    const auto n = static_cast<NodeId>(g_->size());
    for (NodeId i = 0; i < n; ++i) recompute_node(i, p);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t fired = 0;
    while (time_ < t_end) {
        double total = 0.0;
        for (double r : node_rate_) total += r;
        if (!(total > 0.0)) break;
        std::exponential_distribution<double> clock(total);
        const double t_next = time_ + clock(rng);
        if (t_next >= t_end) break;

        // Categorical choice of (node, target) proportional to rate.
        double u = unif(rng) * total;
        NodeId chosen = n;
        for (NodeId i = 0; i < n; ++i) {
            if (node_rate_[i] <= 0.0) continue;
            chosen = i;
            if (u < node_rate_[i]) break;
            u -= node_rate_[i];
        }
        const Compartment from = state_[chosen];
        Compartment to = Compartment::S;
        switch (from) {
        case Compartment::S: to = (u < pressure_[chosen]) ? Compartment::E : Compartment::V; break;
        case Compartment::E: to = Compartment::I; break;
        case Compartment::I: to = Compartment::V; break;
        case Compartment::V: to = Compartment::S; break;
        }

        time_ = t_next;
        state_[chosen] = to;
        if (from == Compartment::S && to == Compartment::E) ++ell_;
        if (from == Compartment::I) {
            --ell_;
            if (ell_ == 0) elimination_time_ = time_;
        }
        if (out) out->push_back({time_, chosen, from, to});
        ++fired;

        recompute_node(chosen, p);
        // Exposure pressure on out-neighbours depends on the chosen node's label.
        if (from != Compartment::V && to != Compartment::S) {
            for (NodeId i : g_->out_neighbors(chosen)) {
                if (state_[i] == Compartment::S) recompute_node(i, p);
            }
        }
    }
    time_ = std::max(time_, t_end);
    return fired;
}

EventTrajectory simulate_path(const SpreadingGraph& g, const ParamsSchedule& schedule, const SystemState& x0,
                              double horizon, Rng& rng) {
    if (!(horizon > 0.0)) throw ValidationError("simulate_path: horizon must be > 0");
    check_dimensions(g, schedule.segment_params(0), x0);
    EventTrajectory traj{x0, {}};
    GillespieProcess proc(g, x0);
    for (std::size_t k = 0; k < schedule.segment_count(); ++k) {
        const double start = schedule.segment_start(k);
        if (start >= horizon) break;
        const double stop = (k + 1 < schedule.segment_count()) ? std::min(schedule.segment_start(k + 1), horizon)
                                                                : horizon;
        proc.advance(schedule.segment_params(k), stop, rng, &traj.events);
    }
    return traj;
}

MasterEquation::MasterEquation(const SpreadingGraph& g, const SpreadingParams& p) : n_(g.size()) {
    if (n_ > kMaxNodes) {
        throw CapacityError("master equation oracle supports at most " + std::to_string(kMaxNodes) +
                            " nodes, got " + std::to_string(n_));
    }
    p.validate(g);
    const std::size_t count = std::size_t{1} << (2 * n_);
    exit_rate_.assign(count, 0.0);
    offsets_.assign(count + 1, 0);
    std::vector<std::size_t> pow4(n_ + 1, 1);
    for (std::size_t i = 1; i <= n_; ++i) pow4[i] = pow4[i - 1] * 4;

    for (std::size_t s = 0; s < count; ++s) {
        const auto x = decode(s, n_);
        const auto rates = transition_rates(g, p, x);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto from = index(x[i]);
            for (std::size_t c = 0; c < kCompartments; ++c) {
                const double r = rates.rate[i][c];
                if (r <= 0.0) continue;
                const std::size_t target = s - from * pow4[i] + c * pow4[i];
                to_.push_back(static_cast<std::uint32_t>(target));
                rate_.push_back(r);
                exit_rate_[s] += r;
            }
        }
        offsets_[s + 1] = to_.size();
    }
}

std::size_t MasterEquation::encode(const SystemState& x) {
    std::size_t s = 0;
    for (std::size_t i = x.size(); i-- > 0;) s = s * 4 + index(x[i]);
    return s;
}

SystemState MasterEquation::decode(std::size_t s, std::size_t n) {
    SystemState x(n, Compartment::S);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<Compartment>(s % 4);
        s /= 4;
    }
    return x;
}

void MasterEquation::derivative(std::span<const double> p, std::span<double> dp) const {
    const std::size_t count = exit_rate_.size();
    for (std::size_t s = 0; s < count; ++s) dp[s] = -exit_rate_[s] * p[s];
    for (std::size_t s = 0; s < count; ++s) {
        const double ps = p[s];
        if (ps == 0.0) continue;
        for (std::size_t k = offsets_[s]; k < offsets_[s + 1]; ++k) dp[to_[k]] += rate_[k] * ps;
    }
}

double MasterEquation::max_exit_rate() const {
    return exit_rate_.empty() ? 0.0 : *std::max_element(exit_rate_.begin(), exit_rate_.end());
}

void MasterEquation::propagate(std::vector<double>& p, double duration, double max_step) const {
    const std::size_t steps = step_count(duration, max_step);
    if (steps == 0) return;
    const double h = duration / static_cast<double>(steps);
    Rk4 rk(p.size());
    auto rhs = [this](std::span<const double> x, std::span<double> dx) { derivative(x, dx); };
    for (std::size_t k = 0; k < steps; ++k) rk.step(rhs, p, h);
}

MarginalVector MasterEquation::marginals(std::span<const double> p) const {
    MarginalVector m;
    m.p.assign(n_, {0.0, 0.0, 0.0, 0.0});
    for (std::size_t s = 0; s < p.size(); ++s) {
        const double ps = p[s];
        if (ps == 0.0) continue;
        std::size_t rest = s;
        for (std::size_t i = 0; i < n_; ++i) {
            m.p[i][rest % 4] += ps;
            rest /= 4;
        }
    }
    return m;
}

namespace {
void check_times(std::span<const double> times) {
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0) || !std::isfinite(times[k])) throw ValidationError("times must be finite and >= 0");
        if (k > 0 && times[k] < times[k - 1]) throw ValidationError("times must be sorted");
    }
}
} // namespace

std::vector<MarginalVector> master_equation_marginals(const SpreadingGraph& g, const SpreadingParams& p,
                                                      const SystemState& x0, std::span<const double> times,
                                                      double max_step) {
    if (g.size() > MasterEquation::kMaxNodes) {
        throw CapacityError("master equation oracle supports at most " +
                            std::to_string(MasterEquation::kMaxNodes) + " nodes, got " + std::to_string(g.size()));
    }
    check_dimensions(g, p, x0);
    check_times(times);
    MasterEquation me(g, p);
    if (const double fastest = me.max_exit_rate(); fastest > 0.0) {
        max_step = std::min(max_step, kOracleRateStep / fastest);
    }
    std::vector<double> dist(me.state_count(), 0.0);
    dist[MasterEquation::encode(x0)] = 1.0;
    std::vector<MarginalVector> out;
    out.reserve(times.size());
    double t = 0.0;
    for (double target : times) {
        me.propagate(dist, target - t, max_step);
        t = target;
        out.push_back(me.marginals(dist));
    }
    return out;
}

MonteCarloMarginals monte_carlo_marginals(const SpreadingGraph& g, const ParamsSchedule& schedule,
                                          const SystemState& x0, std::span<const double> times,
                                          std::size_t trials, Rng& rng) {
    if (trials < 1) throw ValidationError("monte_carlo_marginals: trials must be >= 1");
    check_dimensions(g, schedule.segment_params(0), x0);
    check_times(times);
    const auto n = g.size();
    std::vector<std::vector<std::array<std::size_t, kCompartments>>> counts(
        times.size(), std::vector<std::array<std::size_t, kCompartments>>(n, {0, 0, 0, 0}));

    for (std::size_t trial = 0; trial < trials; ++trial) {
        GillespieProcess proc(g, x0);
        std::size_t seg = 0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            // Advance through every schedule breakpoint before times[k].
            while (proc.time() < times[k]) {
                while (seg + 1 < schedule.segment_count() && schedule.segment_start(seg + 1) <= proc.time()) ++seg;
                double stop = times[k];
                if (seg + 1 < schedule.segment_count()) stop = std::min(stop, schedule.segment_start(seg + 1));
                proc.advance(schedule.segment_params(seg), stop, rng, nullptr);
            }
            for (std::size_t i = 0; i < n; ++i) ++counts[k][i][index(proc.state()[i])];
        }
    }

    MonteCarloMarginals out;
    const double inv = 1.0 / static_cast<double>(trials);
    for (std::size_t k = 0; k < times.size(); ++k) {
        MarginalVector mean, se;
        mean.p.resize(n);
        se.p.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < kCompartments; ++c) {
                const double f = static_cast<double>(counts[k][i][c]) * inv;
                mean.p[i][c] = f;
                se.p[i][c] = std::sqrt(f * (1.0 - f) * inv);
            }
        }
        out.mean.push_back(std::move(mean));
        out.std_error.push_back(std::move(se));
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const EventTrajectory& traj) {
    os << "time,node,from,to\n";
    for (const auto& ev : traj.events) {
        os << format_double(ev.time) << ',' << ev.node << ',' << to_char(ev.from) << ',' << to_char(ev.to) << '\n';
    }
}

} // namespace seiv
