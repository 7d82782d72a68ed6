// Test-side reference computations, kept independent of the library code they check.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "seiv/core.hpp"
#include "seiv/rng.hpp"

namespace oracle {

// max p_E + p_I over {lo <= p <= up, sum p = 1} by enumerating basic solutions:
// three coordinates at a bound, the fourth fixed by the equality.
inline std::optional<double> lp_exposed_infected_max(const std::array<double, 4>& lo,
                                                     const std::array<double, 4>& up, double tol = 1e-12) {
    std::optional<double> best;
    for (int free = 0; free < 4; ++free) {
        for (int mask = 0; mask < 8; ++mask) {
            std::array<double, 4> p{};
            double rest = 0.0;
            int bit = 0;
            for (int c = 0; c < 4; ++c) {
                if (c == free) continue;
                p[c] = (mask >> bit++) & 1 ? up[c] : lo[c];
                rest += p[c];
            }
            p[free] = 1.0 - rest;
            if (p[free] < lo[free] - tol || p[free] > up[free] + tol) continue;
            const double obj = p[1] + p[2];
            if (!best || obj > *best) best = obj;
        }
    }
    return best;
}

struct Instance {
    seiv::SpreadingGraph graph;
    seiv::SpreadingParams params;
    seiv::SystemState x0;
};

// n nodes, each ordered pair linked with probability `density`, rates uniform in [lo, hi].
inline Instance random_instance(std::size_t n, double density, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> rate(lo, hi);
    std::bernoulli_distribution link(density);
    std::uniform_int_distribution<int> label(0, 3);
    std::vector<seiv::Edge> edges;
    for (seiv::NodeId i = 0; i < n; ++i) {
        for (seiv::NodeId j = 0; j < n; ++j) {
            if (i != j && link(rng)) edges.push_back({i, j});
        }
    }
    Instance inst{seiv::SpreadingGraph(n, std::move(edges)), {}, {}};
    auto& p = inst.params;
    for (auto* v : {&p.alpha, &p.xi, &p.delta, &p.eta}) {
        v->resize(n);
        for (auto& x : *v) x = rate(rng);
    }
    for (auto* v : {&p.beta, &p.gamma}) {
        v->resize(inst.graph.edge_count());
        for (auto& x : *v) x = rate(rng);
    }
    std::vector<seiv::Compartment> labels(n);
    for (auto& c : labels) c = static_cast<seiv::Compartment>(label(rng));
    inst.x0 = seiv::SystemState(std::move(labels));
    return inst;
}

// Exact two-state solution of dE/dt = -d E, dI/dt = d E - h I (d != h).
inline double exposed_plus_infected(double d, double h, double e0, double i0, double t) {
    const double e = e0 * std::exp(-d * t);
    const double i = i0 * std::exp(-h * t) + e0 * d / (h - d) * (std::exp(-d * t) - std::exp(-h * t));
    return e + i;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace oracle
