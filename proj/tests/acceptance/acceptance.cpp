// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seiv/analysis.hpp"
#include "seiv/closure.hpp"
#include "seiv/commands.hpp"
#include "seiv/empc.hpp"
#include "seiv/io.hpp"
#include "seiv/stochastic.hpp"

using namespace seiv;
namespace fs = std::filesystem;

namespace {

constexpr double kR = 0.07;
constexpr double kDt = 0.375;
constexpr double kSlack = 1e-6;
constexpr std::size_t kDeskNodes = 50;
constexpr double kDeskDensity = 0.6;
constexpr std::size_t kReplications = 1000;
// Optimizer budget for the 1000-replication ensemble (single core).
constexpr std::size_t kDeskKmax = 4;
constexpr std::size_t kDeskStepDivisor = 32;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SpreadingParams desk_rates(const SpreadingGraph& g) { return SpreadingParams::uniform(g, 0.1, 0.1, 0.1, 1.25, 3.5, 2.0); }

struct InstanceResult {
    bool contained = true, nested = true, bounded = true, crude_above_one = false;
    std::string first_problem;
};

InstanceResult check_instance(const oracle::Instance& inst, double horizon, double step) {
    InstanceResult res;
    const auto crude = integrate_bounds(ClosureKind::Crude, inst.graph, inst.params, inst.x0, horizon, step);
    const auto refined = integrate_bounds(ClosureKind::Refined, inst.graph, inst.params, inst.x0, horizon, step);
    std::vector<double> times;
    for (const auto& s : crude) times.push_back(s.time);
    const auto exact = master_equation_marginals(inst.graph, inst.params, inst.x0, times);
    for (std::size_t t = 0; t < times.size(); ++t) {
        const auto& cb = crude[t].state;
        const auto& rb = refined[t].state;
        for (std::size_t i = 0; i < inst.graph.size(); ++i) {
            for (auto c : kAllCompartments) {
                const double e = exact[t](i, c);
                const bool in = e >= cb.lower(i, c) - kSlack && e <= cb.upper(i, c) + kSlack &&
                                e >= rb.lower(i, c) - kSlack && e <= rb.upper(i, c) + kSlack;
                if (!in && res.contained) {
                    std::ostringstream os;
                    os << "containment t=" << times[t] << " node " << i << " " << to_char(c);
                    res.first_problem = os.str();
                }
                res.contained = res.contained && in;
                res.nested = res.nested && rb.lower(i, c) >= cb.lower(i, c) - kSlack &&
                             rb.upper(i, c) <= cb.upper(i, c) + kSlack;
                res.bounded = res.bounded && rb.lower(i, c) >= -kSlack && rb.upper(i, c) <= 1.0 + kSlack;
                res.crude_above_one = res.crude_above_one || cb.upper(i, c) > 1.0;
            }
        }
    }
    return res;
}

std::vector<oracle::Instance> oracle_instances() {
    std::vector<oracle::Instance> out;
    for (std::uint64_t k = 0; k < 20; ++k) out.push_back(oracle::random_instance(2 + k % 4, 0.5, 0.05, 3.5, 5000 + k));
    return out;
}

void criteria_1_2(Outcome& c1, Outcome& c2) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto instances = oracle_instances();
    std::size_t contained = 0, nested = 0, bounded = 0;
    for (const auto& inst : instances) {
        const auto r = check_instance(inst, 5.0, kDt / 64.0);
        contained += r.contained;
        nested += r.nested;
        bounded += r.bounded;
        if (!r.contained) c1.detail << " (" << r.first_problem << ")";
    }
    const double elapsed = seconds_since(t0);
    c1.detail << instances.size() << " instances n=2..5, horizon 5, step dt/64: " << contained << "/"
              << instances.size() << " contained; " << std::fixed << std::setprecision(1) << elapsed << " s";
    c1.require(contained == instances.size(), "containment");
    c1.require(elapsed < 120.0, "runtime");

    // Sweep for an instance whose crude upper bound leaves [0,1].
    std::optional<std::uint64_t> found;
    for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
        const auto inst = oracle::random_instance(2 + seed % 4, 0.7, 0.05, 3.5, 9000 + seed);
        const auto crude = integrate_bounds(ClosureKind::Crude, inst.graph, inst.params, inst.x0, 5.0, kDt / 64.0);
        for (const auto& s : crude) {
            for (double v : s.state.data()) {
                if (v > 1.0) found = seed;
            }
            if (found) break;
        }
    }
    c2.detail << nested << "/" << instances.size() << " nested, " << bounded << "/" << instances.size()
              << " refined within [0,1]; crude upper > 1 found at sweep seed "
              << (found ? std::to_string(9000 + *found) : std::string("none"));
    c2.require(nested == instances.size(), "nesting");
    c2.require(bounded == instances.size(), "boundedness");
    c2.require(found.has_value(), "crude exceedance sweep");
}

void criterion_3(Outcome& c) {
    auto rng = derive_rng(3, Stream::Instance);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::gamma_distribution<double> gam(1.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 8);
    double worst = 0.0;
    std::size_t dominated = 0;
    const std::size_t samples = 1000;
    for (std::size_t k = 0; k < samples; ++k) {
        const std::size_t n = size(rng);
        BoundsState b(n);
        double lp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 4> p{}, lo{}, up{};
            double total = 0.0;
            for (auto& v : p) total += (v = gam(rng));
            for (std::size_t ci = 0; ci < 4; ++ci) {
                p[ci] /= total;
                // Some intervals are degenerate or touch 0/1.
                const double a = u(rng) < 0.1 ? 1.0 : u(rng);
                const double z = u(rng) < 0.1 ? 1.0 : u(rng);
                lo[ci] = p[ci] * a;
                up[ci] = p[ci] + (1.0 - p[ci]) * (1.0 - z);
                b.lower(i, kAllCompartments[ci]) = lo[ci];
                b.upper(i, kAllCompartments[ci]) = up[ci];
            }
            lp += *oracle::lp_exposed_infected_max(lo, up);
        }
        const double got = optimal_exposed_infected_upper(b);
        worst = std::max(worst, std::abs(got - lp));
        dominated += got <= naive_exposed_infected_upper(b);
    }
    c.detail << samples << " random bound states: max |formula - LP| = " << std::scientific << std::setprecision(2)
             << worst << ", formula <= naive sum in " << dominated << "/" << samples;
    c.require(worst <= 1e-12, "LP agreement");
    c.require(dominated == samples, "tightness ordering");
}

void criterion_4(Outcome& c) {
    const SpreadingGraph one(1, {});
    const double dmin = min_sampling_interval(desk_rates(one), kR);
    const double direct = (std::log(3.5) - std::log(2.25)) / (1.25 - kR);
    c.require(std::abs(dmin - 0.3745) <= 1e-4 && std::abs(dmin - direct) <= 1e-12, "sampling interval value");
    c.require(kDt >= dmin, "dt = 0.375 clears the sampling bound");

    double worst = 0.0;
    const double rates[][2] = {{1.25, 3.5}, {3.5, 1.25}, {0.4, 2.0}, {2.2, 0.3}};
    for (const auto& rd : rates) {
        const auto g = SpreadingGraph(1, {});
        const auto p = SpreadingParams::uniform(g, 0.1, 0.1, 0.1, rd[0], rd[1], 2.0);
        for (const char* x : {"E", "I"}) {
            const auto tr = integrate_bounds(ClosureKind::Refined, g, p, SystemState::parse(x), 2.0, kDt / 64.0);
            for (const auto& s : tr) {
                const double xe = x[0] == 'E' ? 1.0 : 0.0;
                const auto a = analytic_quarantine_bounds(rd[0], rd[1], xe, 1.0 - xe, s.time);
                const double sum = s.state.upper(0, Compartment::E) + s.state.upper(0, Compartment::I);
                worst = std::max(worst, std::abs(sum - a.exposed_plus_infected));
                worst = std::max(worst, std::abs(sum - oracle::exposed_plus_infected(rd[0], rd[1], xe, 1.0 - xe, s.time)));
            }
        }
    }
    c.require(worst <= 1e-6, "analytic vs integrated");

    const auto g = erdos_renyi(kDeskNodes, kDeskDensity, 2024);
    const QuarantineMap map(g, desk_rates(g));
    ControllerConfig cfg;
    auto rng = derive_rng(4, Stream::InitialState);
    std::uniform_int_distribution<int> label(0, 3);
    std::size_t feasible = 0;
    double max_margin = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100; ++k) {
        SystemState x(kDeskNodes, Compartment::S);
        for (std::size_t i = 0; i < kDeskNodes; ++i) x[i] = static_cast<Compartment>(label(rng));
        const double m = stability_margin(g, map, total_quarantine_policy(x), x, cfg);
        feasible += m <= 0.0;
        max_margin = std::max(max_margin, m);
    }
    c.require(feasible == 100, "total quarantine feasibility");
    c.detail << "min sampling interval " << std::setprecision(6) << dmin << " <= 0.375; analytic max error "
             << std::scientific << std::setprecision(2) << worst << "; u_tot feasible on " << feasible
             << "/100 desk states (max margin " << std::setprecision(3) << max_margin << ")";
}

struct Ensemble {
    double ell0 = 0.0;
    std::size_t samples = 0;
    std::vector<std::vector<std::size_t>> ell; // per replication
    std::vector<double> elimination;
    std::size_t censored = 0;
    std::size_t decisions = 0, dominated = 0, within_limit = 0;
    double cost = 0.0, baseline = 0.0;
    double seconds = 0.0;
};

Ensemble run_desk_ensemble() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = erdos_renyi(kDeskNodes, kDeskDensity, 1);
    const QuarantineMap map(g, desk_rates(g));
    auto init_rng = derive_rng(1, Stream::InitialState);
    SystemState x0(kDeskNodes, Compartment::S);
    {
        std::vector<std::size_t> order(kDeskNodes);
        for (std::size_t i = 0; i < kDeskNodes; ++i) order[i] = i;
        for (std::size_t k = 0; k < kDeskNodes / 2; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, kDeskNodes - 1);
            std::swap(order[k], order[pick(init_rng)]);
            x0[order[k]] = k < kDeskNodes / 4 ? Compartment::E : Compartment::I;
        }
    }
    ControllerConfig cfg;
    cfg.k_max = kDeskKmax;
    cfg.step_divisor = kDeskStepDivisor;
    cfg.horizon = 100.0;
    Ensemble e;
    e.ell0 = static_cast<double>(exposed_infected_count(x0));
    e.samples = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.dt + 1e-9)) + 1;
    const std::size_t limit = kDeskNodes * (kDeskNodes + 1) / 2;
    for (std::size_t k = 0; k < kReplications; ++k) {
        auto rng = derive_rng(1, Stream::Process, {k});
        const auto rec = run_closed_loop(g, map, x0, cfg, rng);
        e.ell.push_back(rec.exposed_infected_at_samples(cfg.dt, e.samples));
        if (rec.eliminated()) e.elimination.push_back(rec.elimination_time);
        else ++e.censored;
        for (const auto& d : rec.decisions) {
            ++e.decisions;
            e.dominated += d.cost <= d.baseline_cost;
            e.within_limit += d.descent_max_queries <= limit;
            e.cost += d.cost;
            e.baseline += d.baseline_cost;
        }
    }
    e.seconds = seconds_since(t0);
    return e;
}

void criteria_5_6(const Ensemble& e, Outcome& c5, Outcome& c6) {
    std::size_t ok = 0, worst_index = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(e.ell.size());
    for (std::size_t s = 0; s < e.samples; ++s) {
        for (std::size_t k = 0; k < e.ell.size(); ++k) vals[k] = static_cast<double>(e.ell[k][s]);
        auto rng = derive_rng(5, Stream::Bootstrap, {s});
        const double se = bootstrap_standard_error(vals, 1000, rng);
        const double t = kDt * static_cast<double>(s);
        const double gap = oracle::mean(vals) - decay_envelope(e.ell0, kR, t);
        ok += gap <= 3.0 * se;
        if (gap - 3.0 * se > worst_gap) {
            worst_gap = gap - 3.0 * se;
            worst_index = s;
        }
    }
    c5.detail << kReplications << " replications, n=" << kDeskNodes << ", l(x0)=" << e.ell0 << ", k_max=" << kDeskKmax
              << ", step dt/" << kDeskStepDivisor << ": mean l <= envelope + 3 SE at " << ok << "/" << e.samples
              << " sampling times (tightest at t=" << kDt * static_cast<double>(worst_index) << "); " << std::fixed
              << std::setprecision(0) << e.seconds << " s";
    c5.require(ok == e.samples, "decay envelope");

    const double bound = elimination_time_bound(e.ell0, kR, kDt);
    const double m = e.elimination.empty() ? std::numeric_limits<double>::infinity() : oracle::mean(e.elimination);
    const double b100 = elimination_time_bound(100, kR, kDt);
    std::size_t surv_ok = 0;
    for (std::size_t s = 0; s < e.samples; ++s) {
        double alive = 0.0;
        for (const auto& l : e.ell) alive += l[s] > 0;
        const double f = alive / static_cast<double>(e.ell.size());
        const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(e.ell.size()));
        surv_ok += f <= survival_bound(e.ell0, kR, kDt, kDt * static_cast<double>(s)) + 3.0 * se;
    }
    c6.detail << std::setprecision(3) << "mean elimination time " << m << " <= bound " << bound << " (l0=" << e.ell0
              << "); bound at l0=100 is " << b100 << "; survival within bound at " << surv_ok << "/" << e.samples
              << " sampling times; " << e.censored << " runs not eliminated";
    c6.require(e.censored == 0, "every run eliminated within the horizon");
    c6.require(m <= bound, "elimination bound");
    c6.require(std::abs(b100 - 80.3) < 0.05, "bound value at l0=100");
    c6.require(surv_ok == e.samples, "survival bound");
}

void criterion_7(const Ensemble& e, Outcome& c) {
    std::size_t matched = 0, nontrivial = 0;
    const std::size_t instances = 10;
    std::size_t max_queries = 0;
    for (std::uint64_t seed = 0; seed < instances; ++seed) {
        const auto g = erdos_renyi(4, 0.9, 70 + seed);
        const QuarantineMap map(g, SpreadingParams::uniform(g, 0.1, 2.0 + 0.2 * static_cast<double>(seed), 2.0, 1.25, 3.5, 2.0));
        ControllerConfig cfg;
        cfg.k_max = 2000;
        cfg.r = 0.07 + 0.05 * static_cast<double>(seed % 5);
        const char* states[] = {"EISS", "ISVS", "EEIS", "SIES", "IESV"};
        const auto x = SystemState::parse(states[seed % 5]);
        double best = std::numeric_limits<double>::infinity();
        for (int mask = 0; mask < 16; ++mask) {
            Action a(4);
            for (int i = 0; i < 4; ++i) a.set(i, (mask >> i) & 1);
            if (stability_margin(g, map, a, x, cfg) <= 0.0) best = std::min(best, action_cost(a));
        }
        auto rng = derive_rng(seed, Stream::Optimizer);
        const auto res = multistart_local_descent(g, map, x, cfg, rng);
        matched += res.cost == best;
        nontrivial += best > 0.0;
        for (auto q : res.stats.descent_queries) max_queries = std::max(max_queries, q);
    }
    c.require(matched == instances, "brute-force optimum");
    c.require(max_queries <= 10, "descent query limit on n=4");
    c.require(e.dominated == e.decisions, "cost dominance");
    c.require(e.within_limit == e.decisions, "descent query limit on desk runs");
    c.detail << "n=4 exhaustive: " << matched << "/" << instances << " match (" << nontrivial
             << " with nonzero optimum); desk: cost <= total quarantine in " << e.dominated << "/" << e.decisions
             << " decisions, descent within n(n+1)/2 in " << e.within_limit << "/" << e.decisions
             << "; mean cost " << std::setprecision(3) << e.cost / static_cast<double>(e.decisions) << " vs "
             << e.baseline / static_cast<double>(e.decisions);
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() == "metadata.json") continue;
        out[fs::relative(entry.path(), dir).string()] = read_text_file(entry.path());
    }
    return out;
}

void criterion_8(const fs::path& tmp, Outcome& c) {
    const char* config = R"({
  "seed": 11, "trials": 4,
  "graph": {"n": 12, "p": 0.5},
  "initial": {"exposed": 3, "infected": 3},
  "controller": {"horizon": 8.0, "k_max": 3, "integrator": {"step_divisor": 32}},
  "bounds": {"duration": 2.0},
  "control": {"resamples": 200, "write_records": 2},
  "verify": {"instances": 3, "n_max": 4, "horizon": 2.0, "lp_samples": 100, "soundness_states": 2, "survival_trials": 50}
})";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    {
        std::ofstream(tmp / "scenario.json") << config;
    }
    auto cfg = ScenarioConfig::load(tmp / "scenario.json");
    cfg.set_seed(12);
    std::size_t files = 0, identical = 0;
    std::ostringstream log;
    for (auto cmd : {Command::Simulate, Command::Bounds, Command::Control, Command::Verify}) {
        const auto a = tmp / (std::string(to_string(cmd)) + "_a");
        const auto b = tmp / (std::string(to_string(cmd)) + "_b");
        const int ra = run_command(cmd, cfg, a, log);
        const int rb = run_command(cmd, cfg, b, log);
        c.require(ra == rb, std::string(to_string(cmd)) + " exit codes differ");
        const auto fa = data_files(a), fb = data_files(b);
        c.require(fa.size() == fb.size(), std::string(to_string(cmd)) + " file sets differ");
        for (const auto& [name, text] : fa) {
            ++files;
            auto it = fb.find(name);
            if (it != fb.end() && it->second == text) ++identical;
            else c.require(false, std::string(to_string(cmd)) + "/" + name);
        }
    }
    c.detail << "simulate, bounds, control, verify each run twice: " << identical << "/" << files
             << " data files byte-identical";
    c.require(files > 0, "files written");
}

void report(int id, const char* title, const Outcome& o, bool& all) {
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << title << ": " << o.detail.str()
              << std::endl;
    all = all && o.pass;
}

} // namespace

int main(int argc, char** argv) {
    fs::path tmp = fs::temp_directory_path() / "seiv_acceptance";
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--tmp") == 0) tmp = argv[i + 1];
    }
    bool all = true;
    try {
        Outcome c1, c2;
        criteria_1_2(c1, c2);
        report(1, "oracle containment", c1, all);
        report(2, "nesting and boundedness", c2, all);

        Outcome c3;
        criterion_3(c3);
        report(3, "optimal decay bound equals LP optimum", c3, all);

        Outcome c4;
        criterion_4(c4);
        report(4, "total quarantine numerics", c4, all);

        const auto ensemble = run_desk_ensemble();
        Outcome c5, c6, c7;
        criteria_5_6(ensemble, c5, c6);
        report(5, "closed-loop decay", c5, all);
        report(6, "elimination time and survival bounds", c6, all);
        criterion_7(ensemble, c7);
        report(7, "optimizer properties", c7, all);

        Outcome c8;
        criterion_8(tmp, c8);
        report(8, "determinism", c8, all);
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 2;
    }
    return all ? 0 : 1;
}
