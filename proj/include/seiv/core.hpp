#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seiv {

using NodeId = std::uint32_t;

/// Compartment labels. The numeric values double as digits of the joint-state
/// encoding used by the master-equation oracle.
enum class Compartment : std::uint8_t { S = 0, E = 1, I = 2, V = 3 };

inline constexpr std::size_t kCompartments = 4;
inline constexpr std::array<Compartment, kCompartments> kAllCompartments{
    Compartment::S, Compartment::E, Compartment::I, Compartment::V};

constexpr std::size_t index(Compartment c) { return static_cast<std::size_t>(c); }
char to_char(Compartment c);
Compartment compartment_from_char(char c);

/// Directed edge (target, source): `source` is an in-neighbour of `target`.
struct Edge {
    NodeId target;
    NodeId source;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed contact network stored as in-neighbour CSR. Edge ids are positions
/// in the CSR arrays, i.e. edges are ordered by (target, source).
class SpreadingGraph {
public:
    SpreadingGraph() = default;
    /// Rejects self-loops, duplicates and out-of-range endpoints.
    SpreadingGraph(std::size_t n, std::vector<Edge> edges);

    std::size_t size() const { return n_; }
    std::size_t edge_count() const { return sources_.size(); }

    std::span<const NodeId> in_neighbors(NodeId i) const {
        return {sources_.data() + offsets_[i], sources_.data() + offsets_[i + 1]};
    }
    /// Edge ids of the in-edges of node i; aligned with in_neighbors(i).
    std::size_t in_begin(NodeId i) const { return offsets_[i]; }
    std::size_t in_end(NodeId i) const { return offsets_[i + 1]; }

    /// Out-neighbours of j, i.e. nodes that list j as an in-neighbour.
    std::span<const NodeId> out_neighbors(NodeId j) const {
        return {out_targets_.data() + out_offsets_[j], out_targets_.data() + out_offsets_[j + 1]};
    }

    Edge edge(std::size_t id) const;
    std::vector<Edge> edges() const;
    /// Edge id of (target, source), or -1 when absent.
    std::ptrdiff_t find_edge(NodeId target, NodeId source) const;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> sources_;
    std::vector<NodeId> targets_;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<NodeId> out_targets_;
};

/// Per-node and per-edge Poisson rates. beta/gamma are indexed by edge id of the
/// graph they were built for.
struct SpreadingParams {
    std::vector<double> alpha; // V -> S
    std::vector<double> xi;    // S -> V
    std::vector<double> delta; // E -> I
    std::vector<double> eta;   // I -> V
    std::vector<double> beta;  // exposure from an exposed in-neighbour
    std::vector<double> gamma; // exposure from an infected in-neighbour

    static SpreadingParams uniform(const SpreadingGraph& g, double alpha, double beta, double gamma,
                                   double delta, double eta, double xi);

    /// Throws ValidationError unless sizes match `g` and every rate is finite and >= 0.
    void validate(const SpreadingGraph& g) const;
};

/// The exact process state: one compartment per node.
class SystemState {
public:
    SystemState() = default;
    explicit SystemState(std::vector<Compartment> labels) : labels_(std::move(labels)) {}
    SystemState(std::size_t n, Compartment fill) : labels_(n, fill) {}

    /// Parses a string such as "SEIV"; whitespace is ignored.
    static SystemState parse(std::string_view labels);

    std::size_t size() const { return labels_.size(); }
    Compartment operator[](std::size_t i) const { return labels_[i]; }
    Compartment& operator[](std::size_t i) { return labels_[i]; }
    std::span<const Compartment> labels() const { return labels_; }
    std::string to_string() const;

    friend bool operator==(const SystemState&, const SystemState&) = default;

private:
    std::vector<Compartment> labels_;
};

/// Per-node compartment probabilities.
struct MarginalVector {
    std::vector<std::array<double, kCompartments>> p;

    static MarginalVector indicator(const SystemState& x);
    std::size_t size() const { return p.size(); }
    double operator()(std::size_t i, Compartment c) const { return p[i][index(c)]; }
    /// True when every row sums to one within `tol` and entries lie in [-tol, 1+tol].
    bool is_valid(double tol = 1e-9) const;
};

/// Number of exposed plus infected nodes.
std::size_t exposed_infected_count(const SystemState& x);

inline constexpr double kProbabilityTolerance = 1e-9;

/// max{0, y + z - 1}; inputs must lie in [0,1] up to kProbabilityTolerance.
double frechet_lower(double y, double z);
/// min{y, z}; same input contract as frechet_lower.
double frechet_upper(double y, double z);

/// Directed G(n, p): every ordered pair (i, j), i != j, is an edge independently
/// with probability p. Deterministic given the seed.
SpreadingGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

} // namespace seiv
