#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "amod/tap.hpp"
#include "oracles.hpp"

using namespace amod;

TEST_CASE("all-or-nothing loading") {
    Network net(3, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {2, 3, 1.0, 10.0, 0.15, 4.0}});
    RequestSet reqs{{1, 3, 4.0, RequestClass::private_vehicle}};
    auto flow = all_or_nothing(net, {1.0, 1.0}, reqs);
    CHECK(flow[0] == doctest::Approx(4.0));
    CHECK(flow[1] == doctest::Approx(4.0));

    // two parallel equal-time arcs: the lower index wins
    Network par(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {1, 2, 1.0, 10.0, 0.15, 4.0}});
    auto pflow = all_or_nothing(par, {2.0, 2.0}, {{1, 2, 7.0, RequestClass::private_vehicle}});
    CHECK(pflow[0] == doctest::Approx(7.0));
    CHECK(pflow[1] == 0.0);

    // conservation of the loaded total
    double total = 0.0;
    for (double f : pflow) total += f;
    CHECK(total == doctest::Approx(7.0));

    CHECK_THROWS(all_or_nothing(par, {0.0, 1.0}, {{1, 2, 1.0, RequestClass::private_vehicle}}));
}

TEST_CASE("single arc equilibrium is immediate") {
    Network net(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}});
    RequestSet reqs{{1, 2, 5.0, RequestClass::private_vehicle}};
    EquilibriumReport rep = solve_ue(net, reqs, {0.0});
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(rep.relative_gap == doctest::Approx(0.0));
    CHECK(rep.x_p[0] == doctest::Approx(5.0));
}

TEST_CASE("symmetric parallel arcs split evenly") {
    Network net(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {1, 2, 1.0, 10.0, 0.15, 4.0}});
    RequestSet reqs{{1, 2, 8.0, RequestClass::private_vehicle}};
    UeOptions opt;
    opt.gap_tol = 1e-7;
    opt.max_iter = 2000;
    EquilibriumReport rep = solve_ue(net, reqs, {0.0, 0.0}, opt);
    CHECK(rep.converged);
    CHECK(rep.x_p[0] == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(rep.x_p[1] == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("affine two-arc instance reproduces the analytic split") {
    // t1 = 1 + x, t2 = 2 + x via beta = 1 arcs; demand 3 -> (2, 1)
    Network net(2, {{1, 2, 1.0, 1.0, 1.0, 1.0}, {1, 2, 2.0, 2.0, 1.0, 1.0}});
    RequestSet reqs{{1, 2, 3.0, RequestClass::private_vehicle}};
    UeOptions opt;
    opt.gap_tol = 1e-10;
    opt.max_iter = 500;
    EquilibriumReport rep = solve_ue(net, reqs, {0.0, 0.0}, opt);
    CHECK(rep.converged);
    CHECK(rep.x_p[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.x_p[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.min_od_time[0] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("beckmann potential never increases along the iterations") {
    std::mt19937_64 rng(47);
    Network net = oracle::random_network(rng, 8, 14, 2.0, 9.0);
    std::uniform_int_distribution<int> vtx(1, 8);
    RequestSet reqs;
    while (reqs.size() < 5) {
        const int o = vtx(rng), d = vtx(rng);
        if (o == d) continue;
        bool dup = false;
        for (const Request& r : reqs) dup = dup || (r.origin == o && r.destination == d);
        if (!dup) reqs.push_back({o, d, 3.0, RequestClass::private_vehicle});
    }
    UeOptions opt;
    opt.gap_tol = 1e-6;
    opt.max_iter = 400;
    EquilibriumReport rep = solve_ue(net, reqs, std::vector<double>(net.num_arcs(), 0.0), opt);
    for (std::size_t k = 1; k < rep.beckmann_trace.size(); ++k)
        CHECK(rep.beckmann_trace[k] <= rep.beckmann_trace[k - 1] + 1e-9);
}

TEST_CASE("wardrop check on used paths") {
    std::mt19937_64 rng(53);
    Network net = oracle::random_network(rng, 8, 16, 2.0, 9.0);
    std::uniform_int_distribution<int> vtx(1, 8);
    RequestSet reqs;
    while (reqs.size() < 4) {
        const int o = vtx(rng), d = vtx(rng);
        if (o == d) continue;
        bool dup = false;
        for (const Request& r : reqs) dup = dup || (r.origin == o && r.destination == d);
        if (!dup) reqs.push_back({o, d, 4.0, RequestClass::private_vehicle});
    }
    UeOptions opt;
    opt.gap_tol = 1e-6;
    opt.max_iter = 3000;
    opt.track_od_flows = true;
    EquilibriumReport rep = solve_ue(net, reqs, std::vector<double>(net.num_arcs(), 0.0), opt);
    REQUIRE(rep.converged);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        const double tol = 10.0 * opt.gap_tol * std::max(rep.min_od_time[i], 1.0);
        CHECK(wardrop_used_paths_ok(net, reqs[i], rep.od_flows[i], rep.final_times, tol));
    }
}

TEST_CASE("background flows shift the equilibrium") {
    Network net(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {1, 2, 1.0, 10.0, 0.15, 4.0}});
    RequestSet reqs{{1, 2, 8.0, RequestClass::private_vehicle}};
    UeOptions opt;
    opt.gap_tol = 1e-7;
    opt.max_iter = 2000;
    // arc 0 pre-loaded with AMoD traffic: privates lean on arc 1
    EquilibriumReport rep = solve_ue(net, reqs, {6.0, 0.0}, opt);
    CHECK(rep.x_p[1] > rep.x_p[0]);
    CHECK(rep.x_p[0] + rep.x_p[1] == doctest::Approx(8.0).epsilon(1e-9));
    // total flows equalize the times
    const double f0 = rep.x_p[0] + 6.0, f1 = rep.x_p[1];
    CHECK(f0 == doctest::Approx(f1).epsilon(1e-3));
}

TEST_CASE("bilevel with no amod reduces to the pure equilibrium") {
    Network net(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {1, 2, 1.0, 10.0, 0.15, 4.0}});
    RequestSet priv{{1, 2, 8.0, RequestClass::private_vehicle}};
    ConfigCatalog empty_cat;
    BilevelOptions opt;
    opt.operator_law = TravelTimeLaw::two_line(net, 1.0);
    BilevelResult res = bilevel_solve(net, priv, {}, empty_cat, opt);
    CHECK(res.rounds == 1);
    CHECK(res.operator_solution.objective == doctest::Approx(0.0));
    EquilibriumReport ref = solve_ue(net, priv, {0.0, 0.0}, opt.ue);
    for (int a = 0; a < 2; ++a)
        CHECK(res.private_report.x_p[a] == doctest::Approx(ref.x_p[a]).epsilon(1e-12));
}

TEST_CASE("bilevel with no private demand runs one operator round") {
    Network net(2, {{1, 2, 1.0, 1e9, 0.15, 4.0}, {2, 1, 1.0, 1e9, 0.15, 4.0}});
    RequestSet poolable{{1, 2, 6.0, RequestClass::amod_poolable}};
    ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
    BilevelOptions opt;
    opt.operator_law = TravelTimeLaw::two_line(net, 1.0);
    BilevelResult res = bilevel_solve(net, {}, {}, cat, opt);
    CHECK(res.rounds == 1);
    CHECK(res.converged);
    CHECK(res.operator_solution.objective > 0.0);
}

TEST_CASE("bilevel with huge capacities settles in two rounds") {
    Network net(3, {{1, 2, 1.0, 1e9, 0.15, 4.0},
                    {2, 3, 1.0, 1e9, 0.15, 4.0},
                    {3, 1, 1.0, 1e9, 0.15, 4.0}});
    RequestSet priv{{1, 2, 3.0, RequestClass::private_vehicle}};
    RequestSet poolable{{2, 3, 4.0, RequestClass::amod_poolable}};
    ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
    BilevelOptions opt;
    opt.operator_law = TravelTimeLaw::two_line(net, 1.0);
    BilevelResult res = bilevel_solve(net, priv, {}, cat, opt);
    CHECK(res.converged);
    CHECK(res.rounds <= 2);
}

TEST_CASE("bilevel runs the greedy mode end to end") {
    Network net(3, {{1, 2, 0.3, 20.0, 0.15, 4.0},
                    {2, 3, 0.3, 20.0, 0.15, 4.0},
                    {1, 3, 0.7, 40.0, 0.15, 4.0},
                    {3, 1, 0.3, 1e9, 0.15, 4.0},
                    {2, 1, 0.3, 1e9, 0.15, 4.0},
                    {3, 2, 0.3, 1e9, 0.15, 4.0}});
    RequestSet priv{{1, 3, 6.0, RequestClass::private_vehicle}};
    RequestSet indiv{{2, 3, 2.0, RequestClass::amod_individual}};
    RequestSet poolable{{1, 3, 8.0, RequestClass::amod_poolable},
                        {1, 2, 4.0, RequestClass::amod_poolable}};
    ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
    BilevelOptions opt;
    opt.mode = AssignmentMode::unaware_greedy;
    opt.operator_law = TravelTimeLaw::two_line(net, 1.0);
    opt.max_rounds = 8;
    BilevelResult res = bilevel_solve(net, priv, indiv, cat, opt);
    CHECK(res.operator_solution.objective > 0.0);
    CHECK(!res.objective_trace.empty());
    CHECK(res.drp.max_abs() > 0.0);
    // the split demand is fully served: user accounting of the pooling outcome
    double served = 0.0;
    for (const PoolAllocationEntry& e : res.pooling.allocations) served += 2.0 * e.rate;
    for (double l : res.pooling.leftover) served += l;
    CHECK(served == doctest::Approx(total_rate(poolable)).epsilon(1e-9));
}
