#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "seiv/commands.hpp"
#include "seiv/error.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Options& opt) {
    sub->add_option("--config", opt.config, "Scenario file (.toml or .json)")->required();
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_option("--seed", opt.seed, "Override the config's root seed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEIV epidemic simulation, bounds and quarantine control"};
    app.require_subcommand(1);
    Options opt;
    struct Entry {
        seiv::Command cmd;
        const char* help;
    };
    const Entry entries[] = {
        {seiv::Command::Simulate, "Uncontrolled sample paths"},
        {seiv::Command::Bounds, "Crude and refined bound trajectories"},
        {seiv::Command::Control, "Closed-loop quarantine control ensemble"},
        {seiv::Command::Verify, "Oracle checks on small random instances"},
    };
    for (const auto& e : entries) add_common(app.add_subcommand(seiv::to_string(e.cmd), e.help), opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? seiv::kExitOk : seiv::kExitValidation;
    }

    const auto* sub = app.get_subcommands().front();
    const auto cmd = *seiv::parse_command(sub->get_name());
    try {
        auto cfg = seiv::ScenarioConfig::load(opt.config);
        if (opt.seed) cfg.set_seed(*opt.seed);
        return seiv::run_command(cmd, cfg, opt.out, std::cerr);
    } catch (const std::exception& e) {
        const int rc = seiv::exit_code_for(e);
        std::cerr << "seivctl " << seiv::to_string(cmd) << ": "
                  << (rc == seiv::kExitValidation ? "invalid input: " : "error: ") << e.what() << "\n";
        return rc;
    }
}
