#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "seiv/core.hpp"

namespace seiv {

/// Shortest decimal representation that round-trips; used by every writer so
/// that identical runs produce byte-identical files.
std::string format_double(double v);

struct GraphWithParams {
    SpreadingGraph graph;
    SpreadingParams params;
};

/// Document layout:
///   { "n": int, "edges": [[i,j],...], "alpha": [...], "xi": [...], "delta": [...],
///     "eta": [...], "beta": {"i,j": val}, "gamma": {"i,j": val} }
/// with (i,j) meaning j is an in-neighbour of i, 0-based.
nlohmann::json to_json(const SpreadingGraph& g, const SpreadingParams& p);
GraphWithParams graph_from_json(const nlohmann::json& doc);

GraphWithParams load_graph_file(const std::filesystem::path& path);
void save_graph_file(const std::filesystem::path& path, const SpreadingGraph& g, const SpreadingParams& p);

/// Writes `text` to `path`, creating parent directories; throws IoError with the path.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

void write_marginals_csv(std::ostream& os, std::span<const double> times, std::span<const MarginalVector> m);

} // namespace seiv
