#include "seiv/empc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "seiv/error.hpp"
#include "seiv/io.hpp"

namespace seiv {

Action::Action(std::vector<std::uint8_t> q) : q_(std::move(q)) {
    for (auto v : q_) {
        if (v > 1) throw ValidationError("action entries must be 0 or 1");
    }
}

std::size_t Action::count() const { return static_cast<std::size_t>(std::count(q_.begin(), q_.end(), 1)); }

std::string Action::to_string() const {
    std::string s(q_.size(), '0');
    for (std::size_t i = 0; i < q_.size(); ++i) s[i] = q_[i] ? '1' : '0';
    return s;
}

QuarantineMap::QuarantineMap(const SpreadingGraph& g, SpreadingParams base) : g_(&g), base_(std::move(base)) {
    base_.validate(g);
}

SpreadingParams QuarantineMap::parameters(const Action& a) const {
    if (a.size() != g_->size()) {
        throw ValidationError("action has " + std::to_string(a.size()) + " entries, graph has " +
                              std::to_string(g_->size()));
    }
    SpreadingParams p = base_;
    for (NodeId i = 0; i < g_->size(); ++i) {
        auto nb = g_->in_neighbors(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (a[nb[k]]) {
                const auto id = g_->in_begin(i) + k;
                p.beta[id] = 0.0;
                p.gamma[id] = 0.0;
            }
        }
    }
    return p;
}

double QuarantineMap::cost(const Action& a) const { return action_cost(a); }

SpreadingParams apply_action(const QuarantineMap& map, const Action& a) { return map.parameters(a); }

double action_cost(const Action& a) { return static_cast<double>(a.count()); }

void ControllerConfig::validate() const {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("controller: r must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("controller: dt must be > 0");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("controller: horizon must be >= 0");
    if (step_divisor < 1) throw ValidationError("controller: integrator.step_divisor must be >= 1");
    if (!(slack >= 0.0)) throw ValidationError("controller: slack must be >= 0");
}

namespace {

// Nodes that can hold exposed/infected mass during the interval: the E/I nodes
// and everything reachable from them along edges with a nonzero exposure rate.
std::vector<NodeId> infection_reachable(const SpreadingGraph& g, const SpreadingParams& p, const SystemState& x) {
    std::vector<std::uint8_t> seen(g.size(), 0);
    std::vector<NodeId> frontier;
    for (NodeId i = 0; i < g.size(); ++i) {
        if (x[i] == Compartment::E || x[i] == Compartment::I) {
            seen[i] = 1;
            frontier.push_back(i);
        }
    }
    while (!frontier.empty()) {
        const NodeId j = frontier.back();
        frontier.pop_back();
        for (NodeId i : g.out_neighbors(j)) {
            if (seen[i]) continue;
            const auto id = static_cast<std::size_t>(g.find_edge(i, j));
            if (p.beta[id] == 0.0 && p.gamma[id] == 0.0) continue;
            seen[i] = 1;
            frontier.push_back(i);
        }
    }
    std::vector<NodeId> keep;
    for (NodeId i = 0; i < g.size(); ++i) {
        if (seen[i]) keep.push_back(i);
    }
    return keep;
}

} // namespace

MarginEvaluation evaluate_margin(const SpreadingGraph& g, const SpreadingParams& params, const SystemState& x,
                                 const ControllerConfig& cfg) {
    if (x.size() != g.size()) throw ValidationError("state does not match graph size");
    const auto ell = static_cast<double>(exposed_infected_count(x));
    const double target = ell * std::exp(-cfg.r * cfg.dt);
    if (ell == 0.0) return {0.0, 0.0, 0.0, 0};

    // Nodes outside the reachable set keep zero E/I bounds and lo_S + lo_V = 1,
    // so they contribute nothing to the bound; integrate only the rest.
    const auto keep = infection_reachable(g, params, x);
    ClosureSystem full(ClosureKind::Refined, g, params);
    std::vector<Compartment> sub_labels;
    sub_labels.reserve(keep.size());
    for (NodeId i : keep) sub_labels.push_back(x[i]);
    const SystemState sub_state(std::move(sub_labels));

    IntegrationOptions opts;
    opts.step = cfg.integrator_step();
    opts.slack = cfg.slack;
    opts.record = false;
    const auto traj = keep.size() == g.size()
                          ? integrate_bounds(full, BoundsState::indicator(x), cfg.dt, opts)
                          : integrate_bounds(full.restricted(keep), BoundsState::indicator(sub_state), cfg.dt, opts);
    const double bound = optimal_exposed_infected_upper(traj.back().state);
    return {bound - target, bound, target, keep.size()};
}

double stability_margin(const SpreadingGraph& g, const QuarantineMap& map, const Action& a, const SystemState& x,
                        const ControllerConfig& cfg) {
    return evaluate_margin(g, map.parameters(a), x, cfg).margin;
}

Action total_quarantine_policy(const SystemState& x) {
    Action a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == Compartment::E || x[i] == Compartment::I) a.set(i, true);
    }
    return a;
}

double min_sampling_interval(const SpreadingParams& p, double r) {
    if (p.delta.size() != p.eta.size() || p.delta.empty()) {
        throw ValidationError("min_sampling_interval: delta/eta must be non-empty and of equal length");
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.delta.size(); ++i) {
        const double d = p.delta[i], h = p.eta[i];
        if (d == h) {
            throw ValidationError("min_sampling_interval: delta == eta at node " + std::to_string(i) +
                                  " is not supported");
        }
        const double slow = std::min(d, h);
        if (!(r < slow)) {
            throw ValidationError("min_sampling_interval: r must be below min{delta, eta} at node " +
                                  std::to_string(i));
        }
        const double v = (std::log(std::max(d, h)) - std::log(std::abs(h - d))) / (slow - r);
        worst = std::max(worst, v);
    }
    return worst;
}

QuarantineBounds analytic_quarantine_bounds(double delta, double eta, double xE0, double xI0, double t) {
    if (delta == eta) throw ValidationError("analytic_quarantine_bounds: delta == eta is not supported");
    const double ed = std::exp(-delta * t);
    const double eh = std::exp(-eta * t);
    const double gap = eta - delta;
    return {xE0 * ed, xI0 * eh + (eta / gap) * xE0 * ed - (delta / gap) * xE0 * eh};
}

Action sample_candidate_action(const SystemState& x, Rng& rng) {
    std::bernoulli_distribution active(kQuarantineProbabilityActive);
    std::bernoulli_distribution idle(kQuarantineProbabilityIdle);
    Action a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool ei = x[i] == Compartment::E || x[i] == Compartment::I;
        a.set(i, ei ? active(rng) : idle(rng));
    }
    return a;
}

DescentResult multistart_local_descent(const SystemState& x, std::size_t k_max, const ActionModel& model,
                                       const MarginOracle& margin_of, Rng& rng) {
    DescentStats stats;
    std::unordered_map<std::string, double> cache;
    auto margin = [&](const Action& a) {
        auto key = a.to_string();
        if (auto it = cache.find(key); it != cache.end()) {
            ++stats.cache_hits;
            return it->second;
        }
        ++stats.margin_evaluations;
        const double m = margin_of(a);
        cache.emplace(std::move(key), m);
        return m;
    };

    const Action aux = total_quarantine_policy(x);
    const double aux_margin = margin(aux);
    struct Candidate {
        Action action;
        double cost;
        double margin;
    };
    std::vector<Candidate> candidates{{aux, model.cost(aux), aux_margin}};

    for (std::size_t k = 0; k < k_max; ++k) {
        Action a = sample_candidate_action(x, rng);
        ++stats.samples;
        double m = margin(a);
        if (m > 0.0) continue;
        ++stats.feasible_samples;

        std::size_t queries = 0;
        for (bool improved = true; improved;) {
            improved = false;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!a[i]) continue;
                Action trial = a;
                trial.set(i, false);
                ++queries;
                const double mt = margin(trial);
                if (mt <= 0.0) {
                    a = std::move(trial);
                    m = mt;
                    improved = true;
                    break;
                }
            }
        }
        stats.descent_queries.push_back(queries);
        candidates.push_back({a, model.cost(a), m});
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        if (candidates[c].cost < candidates[best].cost) best = c;
    }
    return {candidates[best].action, candidates[best].cost, candidates[best].margin,
            aux, model.cost(aux), aux_margin, std::move(stats)};
}

DescentResult multistart_local_descent(const SpreadingGraph& g, const QuarantineMap& map, const SystemState& x,
                                       const ControllerConfig& cfg, Rng& rng) {
    cfg.validate();
    auto oracle = [&](const Action& a) { return stability_margin(g, map, a, x, cfg); };
    return multistart_local_descent(x, cfg.k_max, map, oracle, rng);
}

std::vector<std::size_t> ClosedLoopRecord::exposed_infected_at_samples(double dt, std::size_t count) const {
    return trajectory.exposed_infected_at_samples(dt, count);
}

ClosedLoopRecord run_closed_loop(const SpreadingGraph& g, const QuarantineMap& map, const SystemState& x0,
                                 const ControllerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (x0.size() != g.size()) throw ValidationError("initial state does not match graph size");
    Rng process_rng(rng());
    Rng optimizer_rng(rng());

    ClosedLoopRecord rec;
    rec.trajectory.initial = x0;
    GillespieProcess proc(g, x0);

    for (std::size_t k = 0;; ++k) {
        const double t = cfg.dt * static_cast<double>(k);
        if (t >= cfg.horizon) break;
        const SystemState& x = proc.state();
        const std::size_t ell = proc.exposed_infected();
        if (ell == 0 && cfg.early_stop) break;

        Decision d{t, ell, Action(g.size()), 0.0, 0.0, 0.0, 0.0, 0};
        const Action aux = total_quarantine_policy(x);
        d.baseline_cost = map.cost(aux);
        if (ell == 0) {
            // Disease-free is absorbing: the empty action is optimal and has zero margin.
        } else if (cfg.policy == Policy::TotalQuarantine) {
            d.action = aux;
            d.cost = d.baseline_cost;
            d.margin = stability_margin(g, map, aux, x, cfg);
        } else {
            auto res = multistart_local_descent(g, map, x, cfg, optimizer_rng);
            d.action = std::move(res.action);
            d.cost = res.cost;
            d.margin = res.margin;
            for (auto q : res.stats.descent_queries) d.descent_max_queries = std::max(d.descent_max_queries, q);
        }
        d.bound = d.margin + static_cast<double>(ell) * std::exp(-cfg.r * cfg.dt);

        const auto params = map.parameters(d.action);
        if (cfg.record_bounds) {
            IntegrationOptions opts;
            opts.step = cfg.integrator_step();
            opts.slack = cfg.slack;
            auto trace = integrate_bounds(ClosureSystem(ClosureKind::Refined, g, params), BoundsState::indicator(x),
                                          cfg.dt, opts);
            for (auto& s : trace) s.time += t;
            rec.bound_traces.push_back(std::move(trace));
        }
        rec.decisions.push_back(std::move(d));
        proc.advance(params, std::min(t + cfg.dt, std::max(cfg.horizon, t)), process_rng, &rec.trajectory.events);
    }
    rec.end_time = proc.time();
    rec.elimination_time = proc.elimination_time();
    return rec;
}

void write_closed_loop(const std::filesystem::path& dir, const std::string& prefix, const ClosedLoopRecord& rec) {
    nlohmann::json doc;
    doc["initial_state"] = rec.trajectory.initial.to_string();
    doc["initial_exposed_infected"] = exposed_infected_count(rec.trajectory.initial);
    doc["elimination_time"] = rec.eliminated() ? nlohmann::json(rec.elimination_time) : nlohmann::json(nullptr);
    doc["end_time"] = rec.end_time;
    doc["decisions"] = rec.decisions.size();
    doc["events"] = rec.trajectory.events.size();
    doc["trajectory_csv"] = prefix + "_trajectory.csv";
    doc["actions_csv"] = prefix + "_actions.csv";
    if (!rec.bound_traces.empty()) doc["bounds_csv"] = prefix + "_bounds.csv";
    write_text_file(dir / (prefix + ".json"), doc.dump(1) + "\n");

    std::ostringstream traj;
    write_trajectory_csv(traj, rec.trajectory);
    write_text_file(dir / (prefix + "_trajectory.csv"), traj.str());

    std::ostringstream act;
    act << "time,exposed_infected,cost,baseline_cost,margin,bound,quarantined\n";
    for (const auto& d : rec.decisions) {
        act << format_double(d.time) << ',' << d.exposed_infected << ',' << format_double(d.cost) << ','
            << format_double(d.baseline_cost) << ',' << format_double(d.margin) << ','
            << format_double(d.bound) << ',';
        bool first = true;
        for (std::size_t i = 0; i < d.action.size(); ++i) {
            if (!d.action[i]) continue;
            act << (first ? "" : ";") << i;
            first = false;
        }
        act << '\n';
    }
    write_text_file(dir / (prefix + "_actions.csv"), act.str());

    if (!rec.bound_traces.empty()) {
        std::ostringstream b;
        b << "sample_time,time,node,lo_S,up_S,lo_E,up_E,lo_I,up_I,lo_V,up_V\n";
        for (std::size_t k = 0; k < rec.bound_traces.size(); ++k) {
            const auto sample_time = rec.decisions[k].time;
            for (const auto& s : rec.bound_traces[k]) {
                for (std::size_t i = 0; i < s.state.size(); ++i) {
                    b << format_double(sample_time) << ',' << format_double(s.time) << ',' << i;
                    for (auto c : kAllCompartments) {
                        b << ',' << format_double(s.state.lower(i, c)) << ',' << format_double(s.state.upper(i, c));
                    }
                    b << '\n';
                }
            }
        }
        write_text_file(dir / (prefix + "_bounds.csv"), b.str());
    }
}

} // namespace seiv
