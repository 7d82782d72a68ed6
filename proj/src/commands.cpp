#include "seiv/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "seiv/analysis.hpp"
#include "seiv/closure.hpp"
#include "seiv/error.hpp"
#include "seiv/io.hpp"
#include "seiv/stochastic.hpp"

namespace seiv {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<Command> parse_command(std::string_view name) {
    if (name == "simulate") return Command::Simulate;
    if (name == "bounds") return Command::Bounds;
    if (name == "control") return Command::Control;
    if (name == "verify") return Command::Verify;
    return std::nullopt;
}

const char* to_string(Command c) {
    switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Bounds: return "bounds";
    case Command::Control: return "control";
    case Command::Verify: return "verify";
    }
    return "?";
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const CapacityError*>(&e)) return kExitValidation;
    return kExitFailure;
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

void write_metadata(const fs::path& out, Command c, const ScenarioConfig& cfg) {
    write_json(out / "metadata.json", {{"command", to_string(c)}, {"created", utc_timestamp()}, {"config", cfg.to_json()}});
}

void write_scenario(const fs::path& out, const Scenario& s) {
    save_graph_file(out / "graph.json", s.graph, s.params);
    write_text_file(out / "initial_state.txt", s.x0.to_string() + "\n");
}

std::string padded(std::size_t k) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << k;
    return os.str();
}

// Number of sampling times k*dt with k*dt <= horizon.
std::size_t sample_count(double horizon, double dt) {
    const double q = horizon / dt;
    const double nearest = std::round(q);
    const double k = std::abs(q - nearest) <= 1e-9 * std::max(1.0, q) ? nearest : std::floor(q);
    return static_cast<std::size_t>(k) + 1;
}

template <class F>
void parallel_for(std::size_t count, std::size_t workers, F&& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < count;) body(k);
        });
    }
    for (auto& t : pool) t.join();
}

double binomial_se(double f, std::size_t trials) {
    return std::sqrt(f * (1.0 - f) / static_cast<double>(trials));
}

} // namespace

int cmd_simulate(const ScenarioConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    if (cfg.trials < 1) throw ValidationError("trials must be >= 1");
    const auto sc = build_scenario(cfg);
    const double horizon = cfg.simulate.horizon.value_or(cfg.controller.horizon);
    const double dt = cfg.controller.dt;
    const std::size_t samples = sample_count(horizon, dt);
    const ParamsSchedule schedule(sc.params);

    write_scenario(out, sc);
    std::ostringstream summary;
    summary << "trial,events,elimination_time,final_exposed_infected\n";
    std::vector<double> ell_sum(samples, 0.0), alive(samples, 0.0);
    for (std::size_t k = 0; k < cfg.trials; ++k) {
        auto rng = derive_rng(cfg.seed, Stream::Process, {k});
        const auto traj = simulate_path(sc.graph, schedule, sc.x0, horizon, rng);
        std::ostringstream csv;
        write_trajectory_csv(csv, traj);
        write_text_file(out / "trajectories" / ("trajectory_" + padded(k) + ".csv"), csv.str());
        const auto ell = traj.exposed_infected_at_samples(dt, samples);
        for (std::size_t s = 0; s < samples; ++s) {
            ell_sum[s] += static_cast<double>(ell[s]);
            alive[s] += ell[s] > 0 ? 1.0 : 0.0;
        }
        summary << k << ',' << traj.events.size() << ',' << format_double(traj.elimination_time()) << ','
                << exposed_infected_count(traj.final_state()) << '\n';
    }
    write_text_file(out / "summary.csv", summary.str());

    std::ostringstream ens;
    ens << "time,mean_exposed_infected,survival_frequency\n";
    const auto n = static_cast<double>(cfg.trials);
    for (std::size_t s = 0; s < samples; ++s) {
        ens << format_double(dt * static_cast<double>(s)) << ',' << format_double(ell_sum[s] / n) << ','
            << format_double(alive[s] / n) << '\n';
    }
    write_text_file(out / "ensemble.csv", ens.str());
    write_metadata(out, Command::Simulate, cfg);
    log << "simulate: " << cfg.trials << " trajectories written to " << out.string() << "\n";
    return kExitOk;
}

int cmd_bounds(const ScenarioConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const auto sc = build_scenario(cfg);
    const std::size_t div = cfg.bounds.step_divisor.value_or(cfg.controller.step_divisor);
    const double step = cfg.controller.dt / static_cast<double>(div);
    const double slack = cfg.controller.slack;
    IntegrationOptions opts;
    opts.step = step;
    opts.slack = slack;
    const auto start = BoundsState::indicator(sc.x0);
    const auto crude = integrate_bounds(ClosureSystem(ClosureKind::Crude, sc.graph, sc.params), start,
                                        cfg.bounds.duration, opts);
    const auto refined = integrate_bounds(ClosureSystem(ClosureKind::Refined, sc.graph, sc.params), start,
                                          cfg.bounds.duration, opts);

    write_scenario(out, sc);
    std::ostringstream c, r;
    write_bounds_csv(c, crude);
    write_bounds_csv(r, refined);
    write_text_file(out / "crude_bounds.csv", c.str());
    write_text_file(out / "refined_bounds.csv", r.str());

    std::ostringstream cmp;
    cmp << "time,nested,refined_in_unit,crude_max_upper,refined_max_upper,crude_optimal_upper,"
           "refined_optimal_upper,refined_naive_upper,refined_optimal_lower\n";
    bool all_nested = true, all_unit = true;
    double crude_peak = 0.0;
    std::optional<double> first_exceed;
    for (std::size_t k = 0; k < crude.size(); ++k) {
        const auto& cb = crude[k].state;
        const auto& rb = refined[k].state;
        bool nested = true, unit = true;
        double cmax = -INFINITY, rmax = -INFINITY;
        for (std::size_t i = 0; i < cb.size(); ++i) {
            for (auto comp : kAllCompartments) {
                nested = nested && rb.lower(i, comp) >= cb.lower(i, comp) - slack &&
                         rb.upper(i, comp) <= cb.upper(i, comp) + slack;
                unit = unit && rb.lower(i, comp) >= -slack && rb.upper(i, comp) <= 1.0 + slack;
                cmax = std::max(cmax, cb.upper(i, comp));
                rmax = std::max(rmax, rb.upper(i, comp));
            }
        }
        all_nested = all_nested && nested;
        all_unit = all_unit && unit;
        crude_peak = std::max(crude_peak, cmax);
        if (cmax > 1.0 && !first_exceed) first_exceed = crude[k].time;
        cmp << format_double(crude[k].time) << ',' << (nested ? "true" : "false") << ',' << (unit ? "true" : "false")
            << ',' << format_double(cmax) << ',' << format_double(rmax) << ','
            << format_double(optimal_exposed_infected_upper(cb)) << ','
            << format_double(optimal_exposed_infected_upper(rb)) << ','
            << format_double(naive_exposed_infected_upper(rb)) << ','
            << format_double(optimal_exposed_infected_lower(rb)) << '\n';
    }
    write_text_file(out / "bounds_summary.csv", cmp.str());
    write_json(out / "summary.json", {{"grid_points", crude.size()},
                                      {"step", step},
                                      {"all_nested", all_nested},
                                      {"refined_within_unit", all_unit},
                                      {"crude_max_upper", crude_peak},
                                      {"crude_exceeds_one", first_exceed.has_value()},
                                      {"crude_first_exceed_time", first_exceed ? json(*first_exceed) : json(nullptr)}});
    write_metadata(out, Command::Bounds, cfg);
    log << "bounds: " << crude.size() << " grid points, nested=" << (all_nested ? "yes" : "no")
        << ", crude max upper=" << format_double(crude_peak) << "\n";
    return kExitOk;
}

namespace {

struct Replication {
    ClosedLoopRecord record;
    std::vector<std::size_t> ell;
    std::string error;
};

std::vector<Replication> run_ensemble(const Scenario& sc, const ScenarioConfig& cfg, Policy policy,
                                      std::size_t samples) {
    QuarantineMap map(sc.graph, sc.params);
    ControllerConfig cc = cfg.controller;
    cc.policy = policy;
    std::vector<Replication> reps(cfg.trials);
    parallel_for(cfg.trials, cfg.control.workers, [&](std::size_t k) {
        try {
            auto rng = derive_rng(cfg.seed, Stream::Process, {k});
            reps[k].record = run_closed_loop(sc.graph, map, sc.x0, cc, rng);
            reps[k].ell = reps[k].record.exposed_infected_at_samples(cc.dt, samples);
        } catch (const std::exception& e) {
            reps[k].error = e.what();
        }
    });
    return reps;
}

// Quarantine fraction of each replication at each sampling time; 0 once no decision is made.
std::vector<double> fraction_at(const Replication& r, std::size_t samples, std::size_t n, bool baseline) {
    std::vector<double> f(samples, 0.0);
    for (std::size_t k = 0; k < r.record.decisions.size() && k < samples; ++k) {
        const auto& d = r.record.decisions[k];
        f[k] = (baseline ? d.baseline_cost : d.cost) / static_cast<double>(n);
    }
    return f;
}

} // namespace

int cmd_control(const ScenarioConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    if (cfg.trials < 1) throw ValidationError("control requires trials >= 1");
    const auto sc = build_scenario(cfg);
    const auto& cc = cfg.controller;
    const std::size_t n = sc.graph.size();
    const std::size_t samples = sample_count(cc.horizon, cc.dt);
    const double ell0 = static_cast<double>(exposed_infected_count(sc.x0));

    log << "control: " << cfg.trials << " replications, n=" << n << ", l(x0)=" << ell0 << "\n";
    const auto reps = run_ensemble(sc, cfg, cc.policy, samples);
    std::vector<Replication> base;
    if (cfg.control.baseline) base = run_ensemble(sc, cfg, Policy::TotalQuarantine, samples);

    std::vector<std::size_t> ok;
    json errors = json::array();
    for (std::size_t k = 0; k < reps.size(); ++k) {
        if (reps[k].error.empty()) ok.push_back(k);
        else errors.push_back({{"replication", k}, {"error", reps[k].error}});
    }
    std::vector<std::size_t> base_ok;
    for (std::size_t k = 0; k < base.size(); ++k) {
        if (base[k].error.empty()) base_ok.push_back(k);
        else errors.push_back({{"replication", k}, {"policy", "total_quarantine"}, {"error", base[k].error}});
    }

    write_scenario(out, sc);
    if (ok.empty()) {
        write_json(out / "errors.json", errors);
        write_metadata(out, Command::Control, cfg);
        log << "control: every replication failed\n";
        return kExitFailure;
    }

    std::ostringstream ens;
    ens << "time,mean_exposed_infected,ci_lo,ci_hi,bootstrap_se,envelope,survival_frequency,survival_se,"
           "survival_bound,empc_quarantine_fraction,baseline_quarantine_fraction,total_policy_quarantine_fraction,"
           "total_policy_mean_exposed_infected,mean_predicted_upper_next\n";
    bool envelope_ok = true, survival_ok = true;
    const double N = static_cast<double>(ok.size());
    std::vector<double> vals(ok.size());
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = cc.dt * static_cast<double>(s);
        double alive = 0.0, q = 0.0, qb = 0.0, pred = 0.0;
        std::size_t pred_count = 0;
        for (std::size_t m = 0; m < ok.size(); ++m) {
            const auto& r = reps[ok[m]];
            vals[m] = static_cast<double>(r.ell[s]);
            alive += r.ell[s] > 0 ? 1.0 : 0.0;
            if (s < r.record.decisions.size()) {
                const auto& d = r.record.decisions[s];
                q += d.cost / static_cast<double>(n);
                qb += d.baseline_cost / static_cast<double>(n);
                pred += d.bound;
                ++pred_count;
            }
        }
        auto rng = derive_rng(cfg.seed, Stream::Bootstrap, {s});
        const auto ci = bootstrap_mean_ci(vals, cfg.control.level, cfg.control.resamples, rng);
        auto se_rng = derive_rng(cfg.seed, Stream::Bootstrap, {s, 1});
        const double se = bootstrap_standard_error(vals, cfg.control.resamples, se_rng);
        const double m = mean(vals);
        const double env = decay_envelope(ell0, cc.r, t);
        const double surv = alive / N;
        const double surv_se = binomial_se(surv, ok.size());
        const double surv_bound = survival_bound(ell0, cc.r, cc.dt, t);
        envelope_ok = envelope_ok && m <= env + 3.0 * se;
        survival_ok = survival_ok && surv <= surv_bound + 3.0 * surv_se;

        double tq = 0.0, tell = 0.0;
        for (auto k : base_ok) {
            tq += fraction_at(base[k], samples, n, false)[s];
            tell += static_cast<double>(base[k].ell[s]);
        }
        const double bn = base_ok.empty() ? 1.0 : static_cast<double>(base_ok.size());
        ens << format_double(t) << ',' << format_double(m) << ',' << format_double(ci.lo) << ','
            << format_double(ci.hi) << ',' << format_double(se) << ',' << format_double(env) << ','
            << format_double(surv) << ',' << format_double(surv_se) << ',' << format_double(surv_bound) << ','
            << format_double(q / N) << ',' << format_double(qb / N) << ','
            << (base_ok.empty() ? std::string() : format_double(tq / bn)) << ','
            << (base_ok.empty() ? std::string() : format_double(tell / bn)) << ','
            << (pred_count ? format_double(pred / static_cast<double>(pred_count)) : std::string()) << '\n';
    }
    write_text_file(out / "ensemble.csv", ens.str());

    std::ostringstream dec;
    dec << "replication,time,exposed_infected,cost,baseline_cost,margin,bound,descent_max_queries\n";
    std::size_t decisions = 0, dominated = 0, within_limit = 0;
    double cost_sum = 0.0, base_sum = 0.0;
    const std::size_t limit = n * (n + 1) / 2;
    for (auto k : ok) {
        for (const auto& d : reps[k].record.decisions) {
            dec << k << ',' << format_double(d.time) << ',' << d.exposed_infected << ',' << format_double(d.cost)
                << ',' << format_double(d.baseline_cost) << ',' << format_double(d.margin) << ','
                << format_double(d.bound) << ',' << d.descent_max_queries << '\n';
            ++decisions;
            dominated += d.cost <= d.baseline_cost ? 1 : 0;
            within_limit += d.descent_max_queries <= limit ? 1 : 0;
            cost_sum += d.cost;
            base_sum += d.baseline_cost;
        }
    }
    write_text_file(out / "decisions.csv", dec.str());

    std::vector<double> times;
    std::size_t censored = 0;
    for (auto k : ok) {
        if (reps[k].record.eliminated()) times.push_back(reps[k].record.elimination_time);
        else ++censored;
    }
    auto elim = EliminationStats::from(times, ell0, cc.r, cc.dt);
    Interval ci{0.0, 0.0};
    if (!times.empty()) {
        auto rng = derive_rng(cfg.seed, Stream::Bootstrap, {samples});
        ci = bootstrap_mean_ci(times, cfg.control.level, cfg.control.resamples, rng);
    }
    auto report = elimination_report(elim, ell0, cc.r, cc.dt, ci);
    report["eliminated"] = times.size();
    report["censored"] = censored;
    write_json(out / "elimination.json", report);

    std::ostringstream et;
    et << "replication,elimination_time\n";
    for (auto k : ok) et << k << ',' << format_double(reps[k].record.elimination_time) << '\n';
    write_text_file(out / "elimination_times.csv", et.str());

    for (std::size_t k = 0; k < std::min(cfg.control.write_records, reps.size()); ++k) {
        if (reps[k].error.empty()) write_closed_loop(out / "records", "replication_" + padded(k), reps[k].record);
    }

    const bool elim_ok = censored == 0 && elim.mean <= elim.bound;
    write_json(out / "summary.json",
               {{"replications", cfg.trials},
                {"failed", cfg.trials - ok.size()},
                {"initial_exposed_infected", ell0},
                {"decisions", decisions},
                {"mean_cost", decisions ? cost_sum / static_cast<double>(decisions) : 0.0},
                {"mean_baseline_cost", decisions ? base_sum / static_cast<double>(decisions) : 0.0},
                {"cost_dominance_fraction", decisions ? static_cast<double>(dominated) / static_cast<double>(decisions) : 1.0},
                {"descent_within_limit_fraction",
                 decisions ? static_cast<double>(within_limit) / static_cast<double>(decisions) : 1.0},
                {"envelope_holds", envelope_ok},
                {"survival_bound_holds", survival_ok},
                {"elimination_bound_holds", elim_ok}});
    if (!errors.empty()) write_json(out / "errors.json", errors);
    write_metadata(out, Command::Control, cfg);
    log << "control: mean elimination time " << format_double(elim.mean) << " (bound " << format_double(elim.bound)
        << "), envelope " << (envelope_ok ? "holds" : "VIOLATED") << "\n";
    return errors.empty() ? kExitOk : kExitFailure;
}

namespace {

struct Instance {
    SpreadingGraph graph;
    SpreadingParams params;
    SystemState x0;
};

Instance random_instance(const VerifySpec& v, Rng& rng) {
    std::uniform_int_distribution<std::size_t> size(v.n_min, v.n_max);
    std::uniform_real_distribution<double> rate(v.rate_min, v.rate_max);
    std::bernoulli_distribution link(0.5);
    std::uniform_int_distribution<int> label(0, 3);
    const std::size_t n = size(rng);
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = 0; j < n; ++j) {
            if (i != j && link(rng)) edges.push_back({i, j});
        }
    }
    Instance inst{SpreadingGraph(n, std::move(edges)), {}, {}};
    auto& p = inst.params;
    for (auto* vec : {&p.alpha, &p.xi, &p.delta, &p.eta}) {
        vec->resize(n);
        for (auto& x : *vec) x = rate(rng);
    }
    for (auto* vec : {&p.beta, &p.gamma}) {
        vec->resize(inst.graph.edge_count());
        for (auto& x : *vec) x = rate(rng);
    }
    std::vector<Compartment> labels(n);
    for (auto& c : labels) c = static_cast<Compartment>(label(rng));
    inst.x0 = SystemState(std::move(labels));
    return inst;
}

// Largest p_E + p_I with lo <= p <= up and sum p = 1: fill the E/I slack first.
std::optional<double> greedy_lp_upper(const std::array<double, 4>& lo, const std::array<double, 4>& up) {
    const double base = lo[0] + lo[1] + lo[2] + lo[3];
    const double cap = up[0] + up[1] + up[2] + up[3];
    if (base > 1.0 + 1e-12 || cap < 1.0 - 1e-12) return std::nullopt;
    const double room = (up[1] - lo[1]) + (up[2] - lo[2]);
    return lo[1] + lo[2] + std::min(1.0 - base, room);
}

struct CheckResult {
    std::string name;
    bool passed = true;
    std::size_t evaluated = 0;
    json failures = json::array();
    json info = json::object();

    void fail(json detail) {
        passed = false;
        if (failures.size() < 20) failures.push_back(std::move(detail));
    }
    json to_json() const {
        json j{{"name", name}, {"passed", passed}, {"evaluated", evaluated}, {"failures", failures}};
        if (!info.empty()) j["info"] = info;
        return j;
    }
};

const char* compartment_name(Compartment c) {
    static const char* names[] = {"S", "E", "I", "V"};
    return names[index(c)];
}

} // namespace

int cmd_verify(const ScenarioConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const auto& v = cfg.verify;
    if (v.n_max > MasterEquation::kMaxNodes) {
        throw CapacityError("verify: master equation oracle supports at most " +
                            std::to_string(MasterEquation::kMaxNodes) + " nodes, n_max=" + std::to_string(v.n_max));
    }
    const double step = cfg.controller.dt / static_cast<double>(v.step_divisor);
    const double slack = v.slack;

    CheckResult containment{"containment"}, nesting{"nesting"}, boundedness{"boundedness"};
    json exceed = json::array();
    for (std::size_t k = 0; k < v.instances; ++k) {
        auto rng = derive_rng(cfg.seed, Stream::Instance, {k});
        const auto inst = random_instance(v, rng);
        const json where{{"seed", cfg.seed}, {"instance", k}, {"n", inst.graph.size()}};

        IntegrationOptions opts;
        opts.step = step;
        opts.slack = slack;
        if (v.corrupt_rhs) {
            // Fault injection: upper E follows the lower-E dynamics.
            opts.derivative_hook = [](std::span<const double>, std::span<double> dx) {
                for (std::size_t i = 0; i < dx.size(); i += BoundsState::kStride) dx[i + 5] = dx[i + 1];
            };
        }
        const auto start = BoundsState::indicator(inst.x0);
        BoundsTrajectory traj[2];
        const ClosureKind kinds[2] = {ClosureKind::Crude, ClosureKind::Refined};
        bool integrated = true;
        for (int m = 0; m < 2; ++m) {
            try {
                traj[m] = integrate_bounds(ClosureSystem(kinds[m], inst.graph, inst.params), start, v.horizon, opts);
            } catch (const NumericalError& e) {
                integrated = false;
                auto d = where;
                d["closure"] = to_string(kinds[m]);
                d["error"] = e.what();
                containment.fail(d);
            }
        }
        if (!integrated) continue;

        std::vector<double> times;
        for (const auto& s : traj[0]) times.push_back(s.time);
        const auto exact = master_equation_marginals(inst.graph, inst.params, inst.x0, times);
        bool crude_exceeds = false;
        for (std::size_t t = 0; t < times.size(); ++t) {
            for (std::size_t i = 0; i < inst.graph.size(); ++i) {
                for (auto c : kAllCompartments) {
                    const double e = exact[t](i, c);
                    for (int m = 0; m < 2; ++m) {
                        const auto& b = traj[m][t].state;
                        ++containment.evaluated;
                        if (e < b.lower(i, c) - slack || e > b.upper(i, c) + slack) {
                            auto d = where;
                            d.update({{"closure", to_string(kinds[m])}, {"time", times[t]}, {"node", i},
                                      {"compartment", compartment_name(c)}, {"exact", e},
                                      {"lower", b.lower(i, c)}, {"upper", b.upper(i, c)}});
                            containment.fail(d);
                        }
                    }
                    const auto& cb = traj[0][t].state;
                    const auto& rb = traj[1][t].state;
                    ++nesting.evaluated;
                    if (rb.lower(i, c) < cb.lower(i, c) - slack || rb.upper(i, c) > cb.upper(i, c) + slack) {
                        auto d = where;
                        d.update({{"time", times[t]}, {"node", i}, {"compartment", compartment_name(c)}});
                        nesting.fail(d);
                    }
                    ++boundedness.evaluated;
                    if (rb.lower(i, c) < -slack || rb.upper(i, c) > 1.0 + slack) {
                        auto d = where;
                        d.update({{"time", times[t]}, {"node", i}, {"compartment", compartment_name(c)}});
                        boundedness.fail(d);
                    }
                    crude_exceeds = crude_exceeds || cb.upper(i, c) > 1.0;
                }
            }
        }
        if (crude_exceeds) exceed.push_back(k);
    }
    boundedness.info["crude_upper_exceeds_one_instances"] = exceed;

    CheckResult lp{"lp_equivalence"};
    {
        auto rng = derive_rng(cfg.seed, Stream::Instance, {v.instances, 1});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::gamma_distribution<double> gam(1.0, 1.0);
        for (std::size_t k = 0; k < v.lp_samples; ++k) {
            BoundsState b(1);
            std::array<double, 4> lo{}, up{}, p{};
            double total = 0.0;
            for (auto& x : p) total += (x = gam(rng));
            for (std::size_t c = 0; c < 4; ++c) {
                p[c] /= total;
                lo[c] = p[c] * u(rng);
                up[c] = p[c] + (1.0 - p[c]) * u(rng);
                b.lower(0, kAllCompartments[c]) = lo[c];
                b.upper(0, kAllCompartments[c]) = up[c];
            }
            ++lp.evaluated;
            const auto opt = greedy_lp_upper(lo, up);
            const double got = optimal_exposed_infected_upper(b);
            if (!opt || std::abs(*opt - got) > 1e-12 || got > naive_exposed_infected_upper(b) + 1e-15) {
                lp.fail({{"sample", k}, {"formula", got}, {"lp", opt ? json(*opt) : json(nullptr)}});
            }
        }
    }

    CheckResult sound{"feasibility_soundness"};
    {
        ControllerConfig cc = cfg.controller;
        cc.step_divisor = v.step_divisor;
        for (std::size_t k = 0; k < v.instances; ++k) {
            auto rng = derive_rng(cfg.seed, Stream::Instance, {k, 2});
            const auto inst = random_instance(v, rng);
            QuarantineMap map(inst.graph, inst.params);
            std::uniform_int_distribution<int> label(0, 3);
            std::bernoulli_distribution coin(0.5);
            for (std::size_t s = 0; s < v.soundness_states; ++s) {
                std::vector<Compartment> labels(inst.graph.size());
                for (auto& c : labels) c = static_cast<Compartment>(label(rng));
                const SystemState x(std::move(labels));
                Action a(inst.graph.size());
                for (std::size_t i = 0; i < a.size(); ++i) a.set(i, coin(rng));
                const auto params = map.parameters(a);
                const auto ev = evaluate_margin(inst.graph, params, x, cc);
                const double times[] = {cc.dt};
                const auto m = master_equation_marginals(inst.graph, params, x, times);
                double expected = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) expected += m[0](i, Compartment::E) + m[0](i, Compartment::I);
                ++sound.evaluated;
                const bool bound_ok = expected <= ev.bound + slack;
                const bool decay_ok = ev.margin > 0.0 || expected <= ev.target + slack;
                if (!bound_ok || !decay_ok) {
                    sound.fail({{"seed", cfg.seed}, {"instance", k}, {"state", x.to_string()},
                                {"action", a.to_string()}, {"expected", expected}, {"bound", ev.bound},
                                {"target", ev.target}, {"margin", ev.margin}});
                }
            }
        }
    }

    CheckResult survival{"survival_bound"};
    {
        auto rng = derive_rng(cfg.seed, Stream::Instance, {v.instances, 3});
        const auto graph = erdos_renyi(v.n_max, cfg.graph.p, rng());
        const auto& r = cfg.params;
        const auto params = SpreadingParams::uniform(graph, r.alpha, r.beta, r.gamma, r.delta, r.eta, r.xi);
        const auto x0 = random_initial_state(graph.size(), (graph.size() + 1) / 2, graph.size() / 2, rng);
        QuarantineMap map(graph, params);
        ControllerConfig cc = cfg.controller;
        cc.early_stop = true;
        const std::size_t samples = sample_count(cc.horizon, cc.dt);
        std::vector<double> alive(samples, 0.0), ell(samples, 0.0), times;
        for (std::size_t k = 0; k < v.survival_trials; ++k) {
            auto prng = derive_rng(cfg.seed, Stream::Process, {v.instances, k});
            const auto rec = run_closed_loop(graph, map, x0, cc, prng);
            const auto l = rec.exposed_infected_at_samples(cc.dt, samples);
            for (std::size_t s = 0; s < samples; ++s) {
                alive[s] += l[s] > 0 ? 1.0 : 0.0;
                ell[s] += static_cast<double>(l[s]);
            }
            if (rec.eliminated()) times.push_back(rec.elimination_time);
        }
        const double ell0 = static_cast<double>(exposed_infected_count(x0));
        const double N = static_cast<double>(v.survival_trials);
        for (std::size_t s = 0; s < samples && v.survival_trials > 0; ++s) {
            const double t = cc.dt * static_cast<double>(s);
            const double f = alive[s] / N;
            const double b = survival_bound(ell0, cc.r, cc.dt, t);
            ++survival.evaluated;
            if (f > b + 3.0 * binomial_se(f, v.survival_trials)) {
                survival.fail({{"seed", cfg.seed}, {"time", t}, {"frequency", f}, {"bound", b}});
            }
        }
        if (!times.empty()) {
            auto brng = derive_rng(cfg.seed, Stream::Bootstrap, {v.instances});
            const double m = mean(times);
            const double se = bootstrap_standard_error(times, 200, brng);
            const double bound = elimination_time_bound(ell0, cc.r, cc.dt);
            survival.info = {{"initial_state", x0.to_string()}, {"mean_elimination_time", m},
                             {"elimination_time_bound", bound}, {"eliminated", times.size()}};
            ++survival.evaluated;
            if (m > bound + 3.0 * se) survival.fail({{"seed", cfg.seed}, {"mean_elimination_time", m}, {"bound", bound}});
        }
        if (times.size() != v.survival_trials) {
            survival.fail({{"seed", cfg.seed}, {"not_eliminated", v.survival_trials - times.size()}});
        }
    }

    const CheckResult* checks[] = {&containment, &nesting, &boundedness, &lp, &sound, &survival};
    bool all = true;
    json report{{"seed", cfg.seed}, {"checks", json::array()}};
    for (const auto* c : checks) {
        all = all && c->passed;
        report["checks"].push_back(c->to_json());
        log << "verify: " << c->name << ' ' << (c->passed ? "PASS" : "FAIL") << " (" << c->evaluated
            << " evaluations)\n";
        if (!c->passed && !c->failures.empty()) log << "  first failure: " << c->failures.front().dump() << "\n";
    }
    report["passed"] = all;
    write_json(out / "verify_report.json", report);
    write_metadata(out, Command::Verify, cfg);
    return all ? kExitOk : kExitFailure;
}

int run_command(Command c, const ScenarioConfig& cfg, const fs::path& out, std::ostream& log) {
    switch (c) {
    case Command::Simulate: return cmd_simulate(cfg, out, log);
    case Command::Bounds: return cmd_bounds(cfg, out, log);
    case Command::Control: return cmd_control(cfg, out, log);
    case Command::Verify: return cmd_verify(cfg, out, log);
    }
    throw ValidationError("unknown command");
}

} // namespace seiv
