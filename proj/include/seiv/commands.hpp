#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "seiv/scenario.hpp"

namespace seiv {

enum class Command { Simulate, Bounds, Control, Verify };

std::optional<Command> parse_command(std::string_view name);
const char* to_string(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitFailure = 2;

/// Runs one subcommand and writes its files under `out`. Returns kExitOk or
/// kExitFailure (failed verification or replications). Configuration problems
/// throw ValidationError before anything is written. Only metadata.json
/// carries a timestamp; every other file is a pure function of the config.
int run_command(Command c, const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

int cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_bounds(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_control(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_verify(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Exit code for an exception escaping a command: 1 for bad input or a size
/// guard, 2 for everything else.
int exit_code_for(const std::exception& e);

} // namespace seiv
