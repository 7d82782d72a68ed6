#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "seiv/core.hpp"
#include "seiv/error.hpp"
#include "seiv/io.hpp"

using namespace seiv;

TEST_CASE("exposed_infected_count") {
    CHECK(exposed_infected_count(SystemState::parse("SSSS")) == 0);
    CHECK(exposed_infected_count(SystemState::parse("IIII")) == 4);
    CHECK(exposed_infected_count(SystemState::parse("SEIV")) == 2);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> label(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        SystemState x(7, Compartment::S);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<Compartment>(label(rng));
        const auto before = exposed_infected_count(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == Compartment::S) x[i] = Compartment::V;
            else if (x[i] == Compartment::V) x[i] = Compartment::S;
        }
        CHECK(exposed_infected_count(x) == before);
    }
}

TEST_CASE("frechet operators") {
    CHECK(frechet_lower(1.0, 1.0) == 1.0);
    CHECK(frechet_lower(0.6, 0.7) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(frechet_lower(0.2, 0.3) == 0.0);
    CHECK(frechet_upper(0.0, 0.9) == 0.0);
    CHECK(frechet_upper(0.6, 0.7) == 0.6);
    CHECK(frechet_upper(1.0, 1.0) == 1.0);

    CHECK_THROWS_AS(frechet_lower(1.1, 0.5), ValidationError);
    CHECK_THROWS_AS(frechet_upper(0.5, -0.2), ValidationError);
    CHECK_NOTHROW(frechet_upper(1.0 + 1e-12, 0.5));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        const double y = u(rng), z = u(rng);
        const double lo = frechet_lower(y, z), up = frechet_upper(y, z);
        CHECK(lo <= up);
        CHECK(lo >= 0.0);
        CHECK(up <= 1.0);
    }
}

TEST_CASE("graph construction and adjacency") {
    const SpreadingGraph g(4, {{0, 1}, {0, 2}, {3, 0}, {1, 2}});
    CHECK(g.size() == 4);
    CHECK(g.edge_count() == 4);
    auto nb = g.in_neighbors(0);
    CHECK(std::vector<NodeId>(nb.begin(), nb.end()) == std::vector<NodeId>{1, 2});
    auto out = g.out_neighbors(2);
    CHECK(std::set<NodeId>(out.begin(), out.end()) == std::set<NodeId>{0, 1});
    CHECK(g.find_edge(3, 0) >= 0);
    CHECK(g.find_edge(0, 3) == -1);
    for (std::size_t id = 0; id < g.edge_count(); ++id) CHECK(g.find_edge(g.edge(id).target, g.edge(id).source) == static_cast<std::ptrdiff_t>(id));

    CHECK_THROWS_AS(SpreadingGraph(3, {{1, 1}}), ValidationError);
    CHECK_THROWS_AS(SpreadingGraph(3, {{0, 1}, {0, 1}}), ValidationError);
    CHECK_THROWS_AS(SpreadingGraph(3, {{0, 3}}), ValidationError);
}

TEST_CASE("params validation") {
    const SpreadingGraph g(2, {{0, 1}});
    auto p = SpreadingParams::uniform(g, 0.1, 0.1, 0.1, 1.25, 3.5, 2.0);
    CHECK_NOTHROW(p.validate(g));
    p.beta[0] = -1.0;
    CHECK_THROWS_AS(p.validate(g), ValidationError);
    p.beta[0] = NAN;
    CHECK_THROWS_AS(p.validate(g), ValidationError);
    p = SpreadingParams::uniform(g, 0.1, 0.1, 0.1, 1.25, 3.5, 2.0);
    p.gamma.push_back(0.1);
    CHECK_THROWS_AS(p.validate(g), ValidationError);
}

TEST_CASE("system state parsing") {
    auto x = SystemState::parse("S E I\tV");
    CHECK(x.size() == 4);
    CHECK(x.to_string() == "SEIV");
    CHECK_THROWS_AS(SystemState::parse("SEX"), ValidationError);
    auto m = MarginalVector::indicator(x);
    CHECK(m.is_valid());
    CHECK(m(2, Compartment::I) == 1.0);
}

TEST_CASE("erdos_renyi") {
    CHECK(erdos_renyi(3, 0.0, 1).edge_count() == 0);
    CHECK(erdos_renyi(3, 1.0, 1).edge_count() == 6);
    CHECK_THROWS_AS(erdos_renyi(3, 1.5, 1), ValidationError);
    CHECK_THROWS_AS(erdos_renyi(3, -0.1, 1), ValidationError);
    CHECK_THROWS_AS(erdos_renyi(0, 0.5, 1), ValidationError);

    CHECK(erdos_renyi(30, 0.3, 42).edges() == erdos_renyi(30, 0.3, 42).edges());
    CHECK(erdos_renyi(30, 0.3, 42).edges() != erdos_renyi(30, 0.3, 43).edges());

    // Binomial(200*199, 0.6) edge count.
    const double pairs = 200.0 * 199.0;
    const double mu = 0.6 * pairs, sigma = std::sqrt(pairs * 0.6 * 0.4);
    double sum = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const auto g = erdos_renyi(200, 0.6, 1000 + s);
        const double m = static_cast<double>(g.edge_count());
        CHECK(std::abs(m - mu) <= 4.0 * sigma);
        sum += m;
        for (NodeId i = 0; i < g.size(); ++i) {
            for (NodeId j : g.in_neighbors(i)) REQUIRE(i != j);
        }
    }
    CHECK(std::abs(sum / seeds - mu) <= 4.0 * sigma / std::sqrt(double(seeds)));
}

TEST_CASE("graph json round trip") {
    const auto g = erdos_renyi(6, 0.5, 9);
    auto p = SpreadingParams::uniform(g, 0.1, 0.2, 0.3, 1.25, 3.5, 2.0);
    for (std::size_t k = 0; k < p.beta.size(); ++k) p.beta[k] = 0.01 * static_cast<double>(k);
    const auto doc = to_json(g, p);
    const auto back = graph_from_json(doc);
    CHECK(back.graph.edges() == g.edges());
    CHECK(back.params.beta == p.beta);
    CHECK(back.params.gamma == p.gamma);
    CHECK(back.params.eta == p.eta);

    auto bad = doc;
    bad["beta"]["0,0"] = 1.0;
    CHECK_THROWS_AS(graph_from_json(bad), ValidationError);
}

TEST_CASE("format_double round trips") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng);
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.375) == "0.375");
}
