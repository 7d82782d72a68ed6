#include "seiv/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "seiv/error.hpp"
#include "seiv/rng.hpp"

namespace seiv {

char to_char(Compartment c) {
    static constexpr char kLetters[] = {'S', 'E', 'I', 'V'};
    return kLetters[index(c)];
}

Compartment compartment_from_char(char c) {
    switch (c) {
    case 'S': case 's': return Compartment::S;
    case 'E': case 'e': return Compartment::E;
    case 'I': case 'i': return Compartment::I;
    case 'V': case 'v': return Compartment::V;
    default: break;
    }
    throw ValidationError(std::string("unknown compartment label '") + c + "'");
}

SpreadingGraph::SpreadingGraph(std::size_t n, std::vector<Edge> edges) : n_(n) {
    std::sort(edges.begin(), edges.end());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto& e = edges[k];
        if (e.target >= n || e.source >= n) {
            throw ValidationError("edge (" + std::to_string(e.target) + "," + std::to_string(e.source) +
                                  ") out of range for n=" + std::to_string(n));
        }
        if (e.target == e.source) {
            throw ValidationError("self-loop at node " + std::to_string(e.target));
        }
        if (k > 0 && edges[k - 1] == e) {
            throw ValidationError("duplicate edge (" + std::to_string(e.target) + "," +
                                  std::to_string(e.source) + ")");
        }
    }

    offsets_.assign(n + 1, 0);
    sources_.resize(edges.size());
    targets_.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        ++offsets_[edges[k].target + 1];
        sources_[k] = edges[k].source;
        targets_[k] = edges[k].target;
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

    out_offsets_.assign(n + 1, 0);
    for (const auto& e : edges) ++out_offsets_[e.source + 1];
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
    out_targets_.resize(edges.size());
    std::vector<std::size_t> cursor(out_offsets_.begin(), out_offsets_.end() - 1);
    for (const auto& e : edges) out_targets_[cursor[e.source]++] = e.target;
}

Edge SpreadingGraph::edge(std::size_t id) const { return Edge{targets_.at(id), sources_.at(id)}; }

std::vector<Edge> SpreadingGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(sources_.size());
    for (std::size_t k = 0; k < sources_.size(); ++k) out.push_back({targets_[k], sources_[k]});
    return out;
}

std::ptrdiff_t SpreadingGraph::find_edge(NodeId target, NodeId source) const {
    if (target >= n_) return -1;
    auto nb = in_neighbors(target);
    auto it = std::lower_bound(nb.begin(), nb.end(), source);
    if (it == nb.end() || *it != source) return -1;
    return static_cast<std::ptrdiff_t>(offsets_[target] + (it - nb.begin()));
}

SpreadingParams SpreadingParams::uniform(const SpreadingGraph& g, double alpha, double beta, double gamma,
                                         double delta, double eta, double xi) {
    const auto n = g.size();
    const auto m = g.edge_count();
    SpreadingParams p{std::vector<double>(n, alpha), std::vector<double>(n, xi),
                      std::vector<double>(n, delta), std::vector<double>(n, eta),
                      std::vector<double>(m, beta),  std::vector<double>(m, gamma)};
    p.validate(g);
    return p;
}

namespace {
void check_rates(const std::vector<double>& v, std::size_t expected, const char* name) {
    if (v.size() != expected) {
        throw ValidationError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                              std::to_string(expected));
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!std::isfinite(v[k]) || v[k] < 0.0) {
            throw ValidationError(std::string(name) + "[" + std::to_string(k) + "] must be finite and >= 0");
        }
    }
}
} // namespace

void SpreadingParams::validate(const SpreadingGraph& g) const {
    check_rates(alpha, g.size(), "alpha");
    check_rates(xi, g.size(), "xi");
    check_rates(delta, g.size(), "delta");
    check_rates(eta, g.size(), "eta");
    check_rates(beta, g.edge_count(), "beta");
    check_rates(gamma, g.edge_count(), "gamma");
}

SystemState SystemState::parse(std::string_view labels) {
    std::vector<Compartment> out;
    for (char c : labels) {
        if (c == ' ' || c == '\t' || c == '\n' || c == ',') continue;
        out.push_back(compartment_from_char(c));
    }
    return SystemState(std::move(out));
}

std::string SystemState::to_string() const {
    std::string s;
    s.reserve(labels_.size());
    for (auto c : labels_) s.push_back(to_char(c));
    return s;
}

MarginalVector MarginalVector::indicator(const SystemState& x) {
    MarginalVector m;
    m.p.assign(x.size(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < x.size(); ++i) m.p[i][index(x[i])] = 1.0;
    return m;
}

bool MarginalVector::is_valid(double tol) const {
    for (const auto& row : p) {
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= -tol && v <= 1.0 + tol)) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

std::size_t exposed_infected_count(const SystemState& x) {
    return static_cast<std::size_t>(std::count_if(x.labels().begin(), x.labels().end(), [](Compartment c) {
        return c == Compartment::E || c == Compartment::I;
    }));
}

namespace {
double checked_probability(double v, const char* op) {
    if (!(v >= -kProbabilityTolerance && v <= 1.0 + kProbabilityTolerance)) {
        throw ValidationError(std::string(op) + ": argument " + std::to_string(v) + " outside [0,1]");
    }
    return std::clamp(v, 0.0, 1.0);
}
} // namespace

double frechet_lower(double y, double z) {
    y = checked_probability(y, "frechet_lower");
    z = checked_probability(z, "frechet_lower");
    return std::max(0.0, y + z - 1.0);
}

double frechet_upper(double y, double z) {
    y = checked_probability(y, "frechet_upper");
    z = checked_probability(z, "frechet_upper");
    return std::min(y, z);
}

SpreadingGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
    if (n < 1) throw ValidationError("erdos_renyi: n must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("erdos_renyi: p must lie in [0,1]");
    auto rng = derive_rng(seed, Stream::Graph);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = 0; j < n; ++j) {
            if (i == j) continue;
            // Always draw, so the edge set for p and p' share the same coupling.
            if (unif(rng) < p) edges.push_back({i, j});
        }
    }
    return SpreadingGraph(n, std::move(edges));
}

} // namespace seiv
