#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "seiv/core.hpp"
#include "seiv/empc.hpp"

namespace seiv {

struct GraphSpec {
    std::optional<std::filesystem::path> file; // graph+params JSON document; otherwise Erdos-Renyi
    std::size_t n = 50;
    double p = 0.6;
    std::optional<std::uint64_t> seed; // defaults to the root seed
};

/// Uniform rates. A graph file carries its own rates, which a [params]
/// section replaces.
struct RateSpec {
    double alpha = 0.1;
    double beta = 0.1;
    double gamma = 0.1;
    double delta = 1.25;
    double eta = 3.5;
    double xi = 2.0;
};

/// Either explicit labels or a random draw with fixed E and I counts.
struct InitialSpec {
    std::optional<std::string> labels;
    double exposed_fraction = 0.25;
    double infected_fraction = 0.25;
    std::optional<std::size_t> exposed;
    std::optional<std::size_t> infected;
    std::optional<std::uint64_t> seed;
};

struct SimulateSpec {
    std::optional<double> horizon; // defaults to controller.horizon
};

struct BoundsSpec {
    double duration = 5.0;
    std::optional<std::size_t> step_divisor; // defaults to controller's
};

struct ControlSpec {
    double level = 0.98;
    std::size_t resamples = 1000;
    std::size_t write_records = 1; // replications whose full record is written
    bool baseline = true;          // also run the total-quarantine policy ensemble
    std::size_t workers = 1;
};

struct VerifySpec {
    std::size_t instances = 20;
    std::size_t n_min = 2;
    std::size_t n_max = 5;
    double rate_min = 0.05;
    double rate_max = 3.5;
    double horizon = 5.0;
    std::size_t step_divisor = 64;
    double slack = 1e-6;
    std::size_t lp_samples = 1000;
    std::size_t soundness_states = 10;
    std::size_t survival_trials = 400;
    bool corrupt_rhs = false;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    std::size_t trials = 1;
    GraphSpec graph;
    RateSpec params;
    bool params_given = false;
    InitialSpec initial;
    ControllerConfig controller;
    SimulateSpec simulate;
    BoundsSpec bounds;
    ControlSpec control;
    VerifySpec verify;

    /// Reads TOML (.toml) or JSON (.json); relative paths resolve against the file's directory.
    static ScenarioConfig load(const std::filesystem::path& path);
    static ScenarioConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

    /// Replaces the root seed (explicit graph/initial seeds are kept).
    void set_seed(std::uint64_t s);
    void validate() const;
    nlohmann::json to_json() const;
};

struct Scenario {
    SpreadingGraph graph;
    SpreadingParams params;
    SystemState x0;
};

Scenario build_scenario(const ScenarioConfig& cfg);

/// Uniformly random state with exactly `exposed` E nodes and `infected` I nodes, the rest S.
SystemState random_initial_state(std::size_t n, std::size_t exposed, std::size_t infected, Rng& rng);

} // namespace seiv
