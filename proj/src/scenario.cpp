#include "seiv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "seiv/error.hpp"
#include "seiv/io.hpp"

namespace seiv {

namespace {

nlohmann::json toml_to_json(const toml::node& node) {
    if (auto t = node.as_table()) {
        auto obj = nlohmann::json::object();
        for (const auto& [k, v] : *t) obj[std::string(k.str())] = toml_to_json(v);
        return obj;
    }
    if (auto a = node.as_array()) {
        auto arr = nlohmann::json::array();
        for (const auto& v : *a) arr.push_back(toml_to_json(v));
        return arr;
    }
    if (auto v = node.as_string()) return v->get();
    if (auto v = node.as_integer()) return v->get();
    if (auto v = node.as_floating_point()) return v->get();
    if (auto v = node.as_boolean()) return v->get();
    throw ValidationError("unsupported TOML value type (dates and times are not accepted)");
}

// Read-once view of a config table; unknown keys are rejected on close().
class Section {
public:
    Section(const nlohmann::json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
        if (!obj_.is_object()) throw ValidationError(where() + " must be a table");
    }

    bool has(const char* key) const { return obj_.contains(key); }

    const nlohmann::json& raw(const char* key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    template <class T>
    void read(const char* key, T& out) {
        if (!has(key)) return;
        out = get<T>(key);
    }

    template <class T>
    void read(const char* key, std::optional<T>& out) {
        if (!has(key)) return;
        out = get<T>(key);
    }

    Section sub(const char* key) {
        static const nlohmann::json empty = nlohmann::json::object();
        if (!has(key)) return Section(empty, name_.empty() ? key : name_ + "." + key);
        return Section(raw(key), name_.empty() ? key : name_ + "." + key);
    }

    void close() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.count(k)) throw ValidationError("unknown config key '" + qualified(k) + "'");
        }
    }

private:
    template <class T>
    T get(const char* key) {
        const auto& v = raw(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ValidationError("");
                return v.get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<T>(v.get<std::int64_t>());
                if (v.is_number_unsigned()) return v.get<T>();
                throw ValidationError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ValidationError("");
                return v.get<T>();
            } else {
                if (!v.is_string()) throw ValidationError("");
                return T(v.get<std::string>());
            }
        } catch (const std::exception&) {
            throw ValidationError("config key '" + qualified(key) + "' has the wrong type");
        }
    }

    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
    std::string where() const { return name_.empty() ? "config" : "config section [" + name_ + "]"; }

    const nlohmann::json& obj_;
    std::string name_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.is_absolute() || base.empty()) return p;
    return base / p;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

} // namespace

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".toml" && ext != ".json") throw ValidationError(path.string() + ": config must end in .toml or .json");
    if (!std::filesystem::is_regular_file(path)) throw ValidationError(path.string() + ": config file not found");
    const auto text = read_text_file(path);
    nlohmann::json doc;
    if (ext == ".toml") {
        try {
            doc = toml_to_json(toml::parse(text, path.string()));
        } catch (const toml::parse_error& e) {
            throw ValidationError(path.string() + ": " + std::string(e.description()) + " (line " +
                                  std::to_string(e.source().begin.line) + ")");
        }
    } else if (ext == ".json") {
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path.string() + ": " + e.what());
        }
    } else {
        throw ValidationError(path.string() + ": config must end in .toml or .json");
    }
    try {
        return from_json(doc, path.parent_path());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    ScenarioConfig c;
    Section root(doc, "");
    root.read("seed", c.seed);
    root.read("trials", c.trials);

    {
        auto s = root.sub("graph");
        std::optional<std::string> file;
        s.read("file", file);
        if (file) c.graph.file = resolve(base_dir, *file);
        s.read("n", c.graph.n);
        s.read("p", c.graph.p);
        s.read("seed", c.graph.seed);
        s.close();
    }
    if (root.has("params")) {
        c.params_given = true;
        auto s = root.sub("params");
        s.read("alpha", c.params.alpha);
        s.read("beta", c.params.beta);
        s.read("gamma", c.params.gamma);
        s.read("delta", c.params.delta);
        s.read("eta", c.params.eta);
        s.read("xi", c.params.xi);
        s.close();
    }
    {
        auto s = root.sub("initial");
        s.read("labels", c.initial.labels);
        s.read("exposed_fraction", c.initial.exposed_fraction);
        s.read("infected_fraction", c.initial.infected_fraction);
        s.read("exposed", c.initial.exposed);
        s.read("infected", c.initial.infected);
        s.read("seed", c.initial.seed);
        s.close();
    }
    {
        auto s = root.sub("controller");
        auto& k = c.controller;
        s.read("r", k.r);
        s.read("dt", k.dt);
        s.read("horizon", k.horizon);
        s.read("k_max", k.k_max);
        std::optional<std::uint64_t> seed;
        s.read("seed", seed);
        if (seed && !doc.contains("seed")) c.seed = *seed;
        s.read("early_stop", k.early_stop);
        s.read("record_bounds", k.record_bounds);
        std::optional<std::string> policy;
        s.read("policy", policy);
        if (policy) {
            if (*policy == "empc") k.policy = Policy::Empc;
            else if (*policy == "total_quarantine") k.policy = Policy::TotalQuarantine;
            else throw ValidationError("controller.policy must be \"empc\" or \"total_quarantine\"");
        }
        auto integ = s.sub("integrator");
        integ.read("step_divisor", k.step_divisor);
        integ.read("slack", k.slack);
        integ.close();
        s.close();
    }
    {
        auto s = root.sub("simulate");
        s.read("horizon", c.simulate.horizon);
        s.close();
    }
    {
        auto s = root.sub("bounds");
        s.read("duration", c.bounds.duration);
        s.read("step_divisor", c.bounds.step_divisor);
        s.close();
    }
    {
        auto s = root.sub("control");
        s.read("level", c.control.level);
        s.read("resamples", c.control.resamples);
        s.read("write_records", c.control.write_records);
        s.read("baseline", c.control.baseline);
        s.read("workers", c.control.workers);
        s.close();
    }
    {
        auto s = root.sub("verify");
        auto& v = c.verify;
        s.read("instances", v.instances);
        s.read("n_min", v.n_min);
        s.read("n_max", v.n_max);
        s.read("rate_min", v.rate_min);
        s.read("rate_max", v.rate_max);
        s.read("horizon", v.horizon);
        s.read("step_divisor", v.step_divisor);
        s.read("slack", v.slack);
        s.read("lp_samples", v.lp_samples);
        s.read("soundness_states", v.soundness_states);
        s.read("survival_trials", v.survival_trials);
        s.read("corrupt_rhs", v.corrupt_rhs);
        s.close();
    }
    root.close();
    c.controller.seed = c.seed;
    c.validate();
    return c;
}

void ScenarioConfig::set_seed(std::uint64_t s) {
    seed = s;
    controller.seed = s;
}

void ScenarioConfig::validate() const {
    controller.validate();
    if (graph.file) {
        require(std::filesystem::exists(*graph.file), "graph.file does not exist: " + graph.file->string());
    } else {
        require(graph.n >= 1, "graph.n must be >= 1");
        require(graph.p >= 0.0 && graph.p <= 1.0, "graph.p must lie in [0,1]");
    }
    for (double v : {params.alpha, params.beta, params.gamma, params.delta, params.eta, params.xi}) {
        require(finite_nonneg(v), "params: rates must be finite and >= 0");
    }
    require(initial.exposed_fraction >= 0.0 && initial.infected_fraction >= 0.0 &&
                initial.exposed_fraction + initial.infected_fraction <= 1.0,
            "initial: fractions must be >= 0 and sum to at most 1");
    if (simulate.horizon) require(finite_nonneg(*simulate.horizon), "simulate.horizon must be >= 0");
    require(finite_nonneg(bounds.duration), "bounds.duration must be >= 0");
    if (bounds.step_divisor) require(*bounds.step_divisor >= 1, "bounds.step_divisor must be >= 1");
    require(control.level > 0.0 && control.level < 1.0, "control.level must lie in (0,1)");
    require(control.resamples >= 1, "control.resamples must be >= 1");
    require(control.workers >= 1, "control.workers must be >= 1");
    require(verify.n_min >= 1 && verify.n_min <= verify.n_max, "verify: need 1 <= n_min <= n_max");
    require(verify.rate_min >= 0.0 && verify.rate_min <= verify.rate_max, "verify: need 0 <= rate_min <= rate_max");
    require(finite_nonneg(verify.horizon), "verify.horizon must be >= 0");
    require(verify.step_divisor >= 1, "verify.step_divisor must be >= 1");
    require(finite_nonneg(verify.slack), "verify.slack must be >= 0");
}

nlohmann::json ScenarioConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["trials"] = trials;
    auto& g = j["graph"];
    if (graph.file) {
        g["file"] = graph.file->string();
    } else {
        g["n"] = graph.n;
        g["p"] = graph.p;
        g["seed"] = graph.seed.value_or(seed);
    }
    j["params"] = {{"alpha", params.alpha}, {"beta", params.beta}, {"gamma", params.gamma},
                   {"delta", params.delta}, {"eta", params.eta},   {"xi", params.xi}};
    auto& in = j["initial"];
    if (initial.labels) {
        in["labels"] = *initial.labels;
    } else {
        in["exposed_fraction"] = initial.exposed_fraction;
        in["infected_fraction"] = initial.infected_fraction;
        if (initial.exposed) in["exposed"] = *initial.exposed;
        if (initial.infected) in["infected"] = *initial.infected;
        in["seed"] = initial.seed.value_or(seed);
    }
    j["controller"] = {{"r", controller.r},
                       {"dt", controller.dt},
                       {"horizon", controller.horizon},
                       {"k_max", controller.k_max},
                       {"early_stop", controller.early_stop},
                       {"policy", controller.policy == Policy::Empc ? "empc" : "total_quarantine"},
                       {"integrator", {{"step_divisor", controller.step_divisor}, {"slack", controller.slack}}}};
    return j;
}

SystemState random_initial_state(std::size_t n, std::size_t exposed, std::size_t infected, Rng& rng) {
    if (exposed + infected > n) throw ValidationError("initial: more exposed+infected nodes than nodes");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates; std::shuffle's draw pattern is implementation-defined.
    for (std::size_t k = 0; k < exposed + infected; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(order[k], order[pick(rng)]);
    }
    SystemState x(n, Compartment::S);
    for (std::size_t k = 0; k < exposed; ++k) x[order[k]] = Compartment::E;
    for (std::size_t k = exposed; k < exposed + infected; ++k) x[order[k]] = Compartment::I;
    return x;
}

Scenario build_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario s;
    if (cfg.graph.file) {
        auto gp = load_graph_file(*cfg.graph.file);
        s.graph = std::move(gp.graph);
        s.params = std::move(gp.params);
        if (cfg.params_given) {
            const auto& r = cfg.params;
            s.params = SpreadingParams::uniform(s.graph, r.alpha, r.beta, r.gamma, r.delta, r.eta, r.xi);
        }
    } else {
        s.graph = erdos_renyi(cfg.graph.n, cfg.graph.p, cfg.graph.seed.value_or(cfg.seed));
        const auto& r = cfg.params;
        s.params = SpreadingParams::uniform(s.graph, r.alpha, r.beta, r.gamma, r.delta, r.eta, r.xi);
    }
    const std::size_t n = s.graph.size();
    if (cfg.initial.labels) {
        s.x0 = SystemState::parse(*cfg.initial.labels);
        if (s.x0.size() != n) {
            throw ValidationError("initial.labels has " + std::to_string(s.x0.size()) + " entries, graph has " +
                                  std::to_string(n));
        }
    } else {
        const auto count = [n](double frac) {
            return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
        };
        const std::size_t e = cfg.initial.exposed.value_or(count(cfg.initial.exposed_fraction));
        const std::size_t i = cfg.initial.infected.value_or(count(cfg.initial.infected_fraction));
        auto rng = derive_rng(cfg.initial.seed.value_or(cfg.seed), Stream::InitialState);
        s.x0 = random_initial_state(n, e, i, rng);
    }
    return s;
}

} // namespace seiv
