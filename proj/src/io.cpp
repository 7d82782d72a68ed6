#include "seiv/io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "seiv/error.hpp"

namespace seiv {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

nlohmann::json to_json(const SpreadingGraph& g, const SpreadingParams& p) {
    p.validate(g);
    nlohmann::json doc;
    doc["n"] = g.size();
    auto edges = nlohmann::json::array();
    auto beta = nlohmann::json::object();
    auto gamma = nlohmann::json::object();
    for (std::size_t k = 0; k < g.edge_count(); ++k) {
        auto e = g.edge(k);
        edges.push_back({e.target, e.source});
        auto key = std::to_string(e.target) + "," + std::to_string(e.source);
        beta[key] = p.beta[k];
        gamma[key] = p.gamma[k];
    }
    doc["edges"] = std::move(edges);
    doc["alpha"] = p.alpha;
    doc["xi"] = p.xi;
    doc["delta"] = p.delta;
    doc["eta"] = p.eta;
    doc["beta"] = std::move(beta);
    doc["gamma"] = std::move(gamma);
    return doc;
}

namespace {

std::vector<double> node_rates(const nlohmann::json& doc, const char* key, std::size_t n) {
    if (!doc.contains(key)) throw ValidationError(std::string("graph document lacks '") + key + "'");
    const auto& v = doc.at(key);
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    auto out = v.get<std::vector<double>>();
    if (out.size() != n) {
        throw ValidationError(std::string("'") + key + "' must have " + std::to_string(n) + " entries");
    }
    return out;
}

std::vector<double> edge_rates(const nlohmann::json& doc, const char* key, const SpreadingGraph& g) {
    if (!doc.contains(key)) throw ValidationError(std::string("graph document lacks '") + key + "'");
    const auto& v = doc.at(key);
    if (v.is_number()) return std::vector<double>(g.edge_count(), v.get<double>());
    if (!v.is_object()) throw ValidationError(std::string("'") + key + "' must be an object keyed \"i,j\"");
    std::vector<double> out(g.edge_count(), -1.0);
    for (const auto& [k, val] : v.items()) {
        auto comma = k.find(',');
        if (comma == std::string::npos) throw ValidationError("bad edge key '" + k + "'");
        NodeId i = 0, j = 0;
        try {
            i = static_cast<NodeId>(std::stoul(k.substr(0, comma)));
            j = static_cast<NodeId>(std::stoul(k.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ValidationError("bad edge key '" + k + "'");
        }
        auto id = g.find_edge(i, j);
        if (id < 0) throw ValidationError(std::string("'") + key + "' names non-edge " + k);
        out[static_cast<std::size_t>(id)] = val.get<double>();
    }
    for (std::size_t id = 0; id < out.size(); ++id) {
        if (out[id] < 0.0) {
            auto e = g.edge(id);
            throw ValidationError(std::string("'") + key + "' missing or negative for edge " +
                                  std::to_string(e.target) + "," + std::to_string(e.source));
        }
    }
    return out;
}

} // namespace

GraphWithParams graph_from_json(const nlohmann::json& doc) {
    try {
        const auto n = doc.at("n").get<std::size_t>();
        std::vector<Edge> edges;
        for (const auto& e : doc.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ValidationError("edge entries must be [i,j] pairs");
            edges.push_back({e[0].get<NodeId>(), e[1].get<NodeId>()});
        }
        SpreadingGraph g(n, std::move(edges));
        SpreadingParams p{node_rates(doc, "alpha", n), node_rates(doc, "xi", n),
                          node_rates(doc, "delta", n), node_rates(doc, "eta", n),
                          edge_rates(doc, "beta", g),  edge_rates(doc, "gamma", g)};
        p.validate(g);
        return {std::move(g), std::move(p)};
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed graph document: ") + e.what());
    }
}

GraphWithParams load_graph_file(const std::filesystem::path& path) {
    auto text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return graph_from_json(doc);
}

void save_graph_file(const std::filesystem::path& path, const SpreadingGraph& g, const SpreadingParams& p) {
    write_text_file(path, to_json(g, p).dump(1) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_marginals_csv(std::ostream& os, std::span<const double> times, std::span<const MarginalVector> m) {
    os << "time,node,p_S,p_E,p_I,p_V\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (std::size_t i = 0; i < m[k].size(); ++i) {
            os << format_double(times[k]) << ',' << i;
            for (double v : m[k].p[i]) os << ',' << format_double(v);
            os << '\n';
        }
    }
}

} // namespace seiv
