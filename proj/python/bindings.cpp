#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "seiv/analysis.hpp"
#include "seiv/closure.hpp"
#include "seiv/commands.hpp"
#include "seiv/error.hpp"
#include "seiv/empc.hpp"
#include "seiv/io.hpp"
#include "seiv/scenario.hpp"
#include "seiv/stochastic.hpp"

namespace py = pybind11;
using namespace seiv;

namespace {

std::vector<std::array<double, 4>> rows(const MarginalVector& m) { return m.p; }

py::dict bounds_dict(const BoundsTrajectory& traj) {
    std::vector<double> times;
    std::vector<std::vector<std::array<double, 4>>> lower, upper;
    for (const auto& s : traj) {
        times.push_back(s.time);
        std::vector<std::array<double, 4>> lo(s.state.size()), up(s.state.size());
        for (std::size_t i = 0; i < s.state.size(); ++i) {
            for (auto c : kAllCompartments) {
                lo[i][index(c)] = s.state.lower(i, c);
                up[i][index(c)] = s.state.upper(i, c);
            }
        }
        lower.push_back(std::move(lo));
        upper.push_back(std::move(up));
    }
    py::dict d;
    d["time"] = times;
    d["lower"] = lower;
    d["upper"] = upper;
    return d;
}

ClosureKind kind_from(const std::string& name) {
    if (name == "crude") return ClosureKind::Crude;
    if (name == "refined") return ClosureKind::Refined;
    throw ValidationError("closure kind must be 'crude' or 'refined'");
}

Action action_from(const std::vector<int>& q) {
    std::vector<std::uint8_t> v(q.begin(), q.end());
    return Action(std::move(v));
}

ControllerConfig controller(double r, double dt, std::size_t k_max, std::size_t step_divisor) {
    ControllerConfig c;
    c.r = r;
    c.dt = dt;
    c.k_max = k_max;
    c.step_divisor = step_divisor;
    c.validate();
    return c;
}

} // namespace

PYBIND11_MODULE(_seiv, m) {
    m.doc() = "SEIV epidemic process, Frechet bound dynamics and quarantine control";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<SpreadingGraph>(m, "SpreadingGraph")
        .def(py::init([](std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
                 std::vector<Edge> e;
                 for (auto [i, j] : edges) e.push_back({i, j});
                 return SpreadingGraph(n, std::move(e));
             }),
             py::arg("n"), py::arg("edges"))
        .def_property_readonly("n", &SpreadingGraph::size)
        .def_property_readonly("edge_count", &SpreadingGraph::edge_count)
        .def("in_neighbors", [](const SpreadingGraph& g, NodeId i) {
            auto s = g.in_neighbors(i);
            return std::vector<NodeId>(s.begin(), s.end());
        })
        .def("edges", [](const SpreadingGraph& g) {
            std::vector<std::pair<NodeId, NodeId>> out;
            for (auto e : g.edges()) out.emplace_back(e.target, e.source);
            return out;
        });

    py::class_<SpreadingParams>(m, "SpreadingParams")
        .def_static("uniform", &SpreadingParams::uniform, py::arg("graph"), py::arg("alpha"), py::arg("beta"),
                    py::arg("gamma"), py::arg("delta"), py::arg("eta"), py::arg("xi"))
        .def_readwrite("alpha", &SpreadingParams::alpha)
        .def_readwrite("xi", &SpreadingParams::xi)
        .def_readwrite("delta", &SpreadingParams::delta)
        .def_readwrite("eta", &SpreadingParams::eta)
        .def_readwrite("beta", &SpreadingParams::beta)
        .def_readwrite("gamma", &SpreadingParams::gamma);

    m.def("erdos_renyi", &erdos_renyi, py::arg("n"), py::arg("p"), py::arg("seed"));
    m.def("exposed_infected_count",
          [](const std::string& x) { return exposed_infected_count(SystemState::parse(x)); });
    m.def("frechet_lower", &frechet_lower);
    m.def("frechet_upper", &frechet_upper);
    m.def("complement_bound", &complement_bound, py::arg("upper_self"), py::arg("y"));

    m.def(
        "simulate_path",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::string& x0, double horizon,
           std::uint64_t seed) {
            auto rng = derive_rng(seed, Stream::Process);
            const auto traj = simulate_path(g, ParamsSchedule(p), SystemState::parse(x0), horizon, rng);
            std::vector<std::tuple<double, NodeId, char, char>> out;
            for (const auto& e : traj.events) out.emplace_back(e.time, e.node, to_char(e.from), to_char(e.to));
            return out;
        },
        py::arg("graph"), py::arg("params"), py::arg("x0"), py::arg("horizon"), py::arg("seed"));

    m.def(
        "master_equation_marginals",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::string& x0, const std::vector<double>& times) {
            std::vector<std::vector<std::array<double, 4>>> out;
            for (const auto& mv : master_equation_marginals(g, p, SystemState::parse(x0), times)) out.push_back(rows(mv));
            return out;
        },
        py::arg("graph"), py::arg("params"), py::arg("x0"), py::arg("times"));

    m.def(
        "integrate_bounds",
        [](const std::string& kind, const SpreadingGraph& g, const SpreadingParams& p, const std::string& x0,
           double duration, double step) {
            return bounds_dict(integrate_bounds(kind_from(kind), g, p, SystemState::parse(x0), duration, step));
        },
        py::arg("kind"), py::arg("graph"), py::arg("params"), py::arg("x0"), py::arg("duration"), py::arg("step"));

    m.def(
        "optimal_exposed_infected_upper",
        [](const std::vector<std::array<double, 4>>& lower, const std::vector<std::array<double, 4>>& upper) {
            if (lower.size() != upper.size()) throw ValidationError("lower and upper must have the same length");
            BoundsState b(lower.size());
            for (std::size_t i = 0; i < lower.size(); ++i) {
                for (auto c : kAllCompartments) {
                    b.lower(i, c) = lower[i][index(c)];
                    b.upper(i, c) = upper[i][index(c)];
                }
            }
            return optimal_exposed_infected_upper(b);
        },
        py::arg("lower"), py::arg("upper"));

    m.def(
        "apply_action",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::vector<int>& a) {
            return QuarantineMap(g, p).parameters(action_from(a));
        },
        py::arg("graph"), py::arg("params"), py::arg("action"));
    m.def(
        "total_quarantine_policy",
        [](const std::string& x) { return total_quarantine_policy(SystemState::parse(x)).to_string(); });
    m.def(
        "stability_margin",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::vector<int>& a, const std::string& x,
           double r, double dt, std::size_t step_divisor) {
            return stability_margin(g, QuarantineMap(g, p), action_from(a), SystemState::parse(x),
                                    controller(r, dt, 0, step_divisor));
        },
        py::arg("graph"), py::arg("params"), py::arg("action"), py::arg("state"), py::arg("r") = 0.07,
        py::arg("dt") = 0.375, py::arg("step_divisor") = 64);
    m.def(
        "multistart_local_descent",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::string& x, double r, double dt,
           std::size_t k_max, std::size_t step_divisor, std::uint64_t seed) {
            auto rng = derive_rng(seed, Stream::Optimizer);
            auto res = multistart_local_descent(g, QuarantineMap(g, p), SystemState::parse(x),
                                                controller(r, dt, k_max, step_divisor), rng);
            py::dict d;
            d["action"] = res.action.to_string();
            d["cost"] = res.cost;
            d["margin"] = res.margin;
            d["auxiliary_cost"] = res.auxiliary_cost;
            d["descent_queries"] = res.stats.descent_queries;
            return d;
        },
        py::arg("graph"), py::arg("params"), py::arg("state"), py::arg("r") = 0.07, py::arg("dt") = 0.375,
        py::arg("k_max") = 8, py::arg("step_divisor") = 64, py::arg("seed") = 1);
    m.def(
        "run_closed_loop",
        [](const SpreadingGraph& g, const SpreadingParams& p, const std::string& x0, double r, double dt,
           double horizon, std::size_t k_max, std::size_t step_divisor, std::uint64_t seed) {
            auto cfg = controller(r, dt, k_max, step_divisor);
            cfg.horizon = horizon;
            auto rng = derive_rng(seed, Stream::Process);
            const auto rec = run_closed_loop(g, QuarantineMap(g, p), SystemState::parse(x0), cfg, rng);
            std::vector<py::dict> decisions;
            for (const auto& d : rec.decisions) {
                py::dict e;
                e["time"] = d.time;
                e["exposed_infected"] = d.exposed_infected;
                e["action"] = d.action.to_string();
                e["cost"] = d.cost;
                e["baseline_cost"] = d.baseline_cost;
                e["margin"] = d.margin;
                decisions.push_back(e);
            }
            py::dict out;
            out["elimination_time"] = rec.eliminated() ? py::cast(rec.elimination_time) : py::none();
            out["end_time"] = rec.end_time;
            out["events"] = rec.trajectory.events.size();
            out["decisions"] = decisions;
            return out;
        },
        py::arg("graph"), py::arg("params"), py::arg("x0"), py::arg("r") = 0.07, py::arg("dt") = 0.375,
        py::arg("horizon") = 100.0, py::arg("k_max") = 8, py::arg("step_divisor") = 64, py::arg("seed") = 1);

    m.def(
        "min_sampling_interval", [](const SpreadingParams& p, double r) { return min_sampling_interval(p, r); },
        py::arg("params"), py::arg("r"));
    m.def(
        "analytic_quarantine_bounds",
        [](double delta, double eta, double xE0, double xI0, double t) {
            const auto b = analytic_quarantine_bounds(delta, eta, xE0, xI0, t);
            return std::make_pair(b.exposed, b.exposed_plus_infected);
        },
        py::arg("delta"), py::arg("eta"), py::arg("xE0"), py::arg("xI0"), py::arg("t"));

    m.def("decay_envelope", &decay_envelope, py::arg("ell0"), py::arg("r"), py::arg("t"));
    m.def("tau_one", &tau_one, py::arg("ell0"), py::arg("r"), py::arg("dt"));
    m.def("elimination_time_bound", &elimination_time_bound, py::arg("ell0"), py::arg("r"), py::arg("dt"));
    m.def("survival_bound", &survival_bound, py::arg("ell0"), py::arg("r"), py::arg("dt"), py::arg("t"));
    m.def(
        "bootstrap_mean_ci",
        [](const std::vector<double>& samples, double level, std::size_t resamples, std::uint64_t seed) {
            auto rng = derive_rng(seed, Stream::Bootstrap);
            const auto ci = bootstrap_mean_ci(samples, level, resamples, rng);
            return std::make_pair(ci.lo, ci.hi);
        },
        py::arg("samples"), py::arg("level") = 0.98, py::arg("resamples") = 1000, py::arg("seed") = 1);

    m.def(
        "run_command",
        [](const std::string& name, const std::filesystem::path& config, const std::filesystem::path& out,
           std::optional<std::uint64_t> seed) {
            const auto cmd = parse_command(name);
            if (!cmd) throw ValidationError("unknown command '" + name + "'");
            auto cfg = ScenarioConfig::load(config);
            if (seed) cfg.set_seed(*seed);
            std::ostringstream log;
            int rc;
            {
                py::gil_scoped_release release;
                rc = run_command(*cmd, cfg, out, log);
            }
            return std::make_pair(rc, log.str());
        },
        py::arg("command"), py::arg("config"), py::arg("out"), py::arg("seed") = py::none());
}
