#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "amod/io.hpp"
#include "amod/joint_qp.hpp"
#include "oracles.hpp"

using namespace amod;

namespace {

// o -> d and a return arc so rebalancing can close the loop
Network loop_network(double t_fwd, double t_rev, double cap) {
    return Network(2, {{1, 2, t_fwd, cap, 0.15, 4.0}, {2, 1, t_rev, cap, 0.15, 4.0}});
}

RequestSet one_poolable(double rate) {
    return {{1, 2, rate, RequestClass::amod_poolable}};
}

std::vector<double> zeros(const Network& net) {
    return std::vector<double>(net.num_arcs(), 0.0);
}

}  // namespace

TEST_CASE("single request: self-pool carries half the user rate as vehicles") {
    Network net = loop_network(1.0, 1.0, 1e9);
    ConfigCatalog cat = precompute_catalog(net, one_poolable(8.0), kInf);
    ConvexProgram prog =
        assemble_joint(net, cat, TravelTimeLaw::two_line(net, 1.0), 1.0, zeros(net));
    FlowSolution sol = solve(prog);

    REQUIRE(sol.gamma.size() == 1);
    CHECK(sol.gamma.at({0, 0, 1}) == doctest::Approx(4.0).epsilon(1e-9));
    const auto u = sol.X.row_sums();
    CHECK(u[0] == doctest::Approx(4.0).epsilon(1e-9));        // forward vehicles
    CHECK(sol.x_r[1] == doctest::Approx(4.0).epsilon(1e-9));  // return rebalancing
    // effectively free-flow: J = 4*(1) + 4*(1)
    CHECK(sol.objective == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(sol.diag.converged);
    CHECK(sol.diag.demand_residual <= 1e-8);
    CHECK(sol.diag.conservation_residual <= 1e-6);
    CHECK(sol.diag.rebalance_residual <= 1e-6);
}

TEST_CASE("two identical-OD requests enumerate six gamma variables") {
    Network net = loop_network(1.0, 1.0, 1e9);
    RequestSet poolable{{1, 2, 4.0, RequestClass::amod_poolable},
                        {1, 2, 6.0, RequestClass::amod_poolable}};
    ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
    REQUIRE(cat.pairs.size() == 1);
    CHECK(cat.pairs[0].options.size() + 2 == 6);

    ConvexProgram prog =
        assemble_joint(net, cat, TravelTimeLaw::two_line(net, 1.0), 1.0, zeros(net));
    FlowSolution sol = solve(prog);
    CHECK(sol.diag.demand_residual <= 1e-8);
    double cover0 = 0.0, cover1 = 0.0;
    for (const auto& [key, value] : sol.gamma) {
        const auto [m, n, c] = key;
        if (m == n) (m == 0 ? cover0 : cover1) += 2.0 * value;
        else {
            cover0 += value;
            cover1 += value;
        }
    }
    CHECK(cover0 == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(cover1 == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("routing with zero demand and on a line") {
    Network net = loop_network(1.0, 2.0, 1e9);
    Matrix zero(2, 2);
    FlowSolution sol =
        solve_routing(net, zero, TravelTimeLaw::two_line(net, 1.0), 1.0, zeros(net));
    CHECK(sol.objective == doctest::Approx(0.0));
    CHECK(sol.X.max_abs() == 0.0);

    Matrix d(2, 2);
    d(1, 0) = 5.0;
    d(0, 0) = -5.0;
    FlowSolution line = solve_routing(net, d, TravelTimeLaw::two_line(net, 1.0), 1.0, zeros(net));
    const auto u = line.X.row_sums();
    CHECK(u[0] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(line.x_r[1] == doctest::Approx(5.0).epsilon(1e-9));
    // huge capacities: cost equals free-flow shortest-path routing + return
    CHECK(line.objective == doctest::Approx(5.0 * 1.0 + 5.0 * 2.0).epsilon(1e-6));
}

TEST_CASE("demand list validation") {
    Matrix bad(2, 2);
    bad(1, 0) = 1.0;  // column does not sum to zero
    CHECK_THROWS(demand_list(bad));
    Matrix neg(2, 2);
    neg(1, 0) = -1.0;
    neg(0, 0) = 1.0;
    CHECK_THROWS(demand_list(neg));
}

TEST_CASE("rho weighting: user time of a rho=0 solve is no worse") {
    Network net(2, {{1, 2, 1.0, 4.0, 0.15, 4.0},
                    {1, 2, 1.6, 50.0, 0.15, 4.0},
                    {2, 1, 0.5, 1e9, 0.15, 4.0}});
    Matrix d(2, 2);
    d(1, 0) = 10.0;
    d(0, 0) = -10.0;
    auto law = TravelTimeLaw::two_line(net, 1.0);
    FlowSolution s1 = solve_routing(net, d, law, 1.0, zeros(net));
    FlowSolution s0 = solve_routing(net, d, law, 0.0, zeros(net));
    const double user1 = objective(s1.t, s1.X, s1.x_r, 0.0);
    const double user0 = objective(s0.t, s0.X, s0.x_r, 0.0);
    CHECK(user0 <= user1 + 1e-6 * (1.0 + std::abs(user1)));
}

TEST_CASE("congested split equalizes marginal costs against a 1-D oracle") {
    Network net(2, {{1, 2, 1.0, 5.0, 0.15, 4.0},
                    {1, 2, 1.5, 40.0, 0.15, 4.0},
                    {2, 1, 0.3, 1e9, 0.15, 4.0}});
    auto law = TravelTimeLaw::two_line(net, 1.0);
    const double alpha = 20.0;
    Matrix d(2, 2);
    d(1, 0) = alpha;
    d(0, 0) = -alpha;
    FlowSolution sol = solve_routing(net, d, law, 1.0, zeros(net), {1e-6, 20000});

    auto total_cost = [&](double x) {
        const double f0 = x, f1 = alpha - x;
        const double t0 = law.arc_time(net, 0, f0);
        const double t1 = law.arc_time(net, 1, f1);
        const double tr = law.arc_time(net, 2, alpha);
        return t0 * f0 + t1 * f1 + tr * alpha;
    };
    double lo = 0.0, hi = alpha;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    for (int it = 0; it < 200; ++it) {
        if (total_cost(x1) < total_cost(x2)) {
            hi = x2;
            x2 = x1;
            x1 = hi - gr * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + gr * (hi - lo);
        }
    }
    const double best = total_cost(0.5 * (lo + hi));
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-5));
    const auto u = sol.X.row_sums();
    CHECK(u[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(2e-3));
}

TEST_CASE("relabeling symmetry") {
    Network net(4, {{1, 2, 1.0, 10.0, 0.15, 4.0},
                    {2, 1, 1.0, 10.0, 0.15, 4.0},
                    {3, 4, 1.0, 10.0, 0.15, 4.0},
                    {4, 3, 1.0, 10.0, 0.15, 4.0}});
    auto law = TravelTimeLaw::two_line(net, 1.0);
    Matrix d1(4, 4), d2(4, 4);
    d1(1, 0) = 7.0;
    d1(0, 0) = -7.0;
    d2(3, 2) = 7.0;
    d2(2, 2) = -7.0;
    FlowSolution a = solve_routing(net, d1, law, 1.0, zeros(net));
    FlowSolution b = solve_routing(net, d2, law, 1.0, zeros(net));
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-12));
}

TEST_CASE("rebalancing feasibility certificate") {
    Network net = loop_network(1.0, 2.0, 1e9);
    Matrix balanced(2, 2);
    balanced(0, 0) = 3.0;
    balanced(1, 0) = 3.0;  // same commodity loops back: zero divergence
    auto xr0 = rebalancing_feasibility_check(net, balanced);
    CHECK(xr0[0] == doctest::Approx(0.0));
    CHECK(xr0[1] == doctest::Approx(0.0));

    Matrix oneway(2, 2);
    oneway(0, 0) = 3.0;
    auto xr = rebalancing_feasibility_check(net, oneway);
    CHECK(xr[1] == doctest::Approx(3.0).epsilon(1e-12));

    auto [sf, reqs] = parse_tntp(read_file(std::string(DATA_DIR) + "/SiouxFalls_net.tntp"),
                                 read_file(std::string(DATA_DIR) + "/SiouxFalls_trips.tntp"));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    Matrix X(sf.num_arcs(), sf.num_vertices());
    std::map<int, ShortestPathTree> trees;
    const auto t0 = sf.free_flow_times();
    int loaded = 0;
    for (const Request& r : reqs) {
        if (pick(rng) < 0.9) continue;
        auto it = trees.find(r.origin);
        if (it == trees.end()) it = trees.emplace(r.origin, shortest_paths(sf, t0, r.origin)).first;
        int at = r.destination;
        while (at != r.origin) {
            const int a = it->second.pred_arc[at - 1];
            X(a, r.origin - 1) += r.rate;
            at = sf.arc(a).tail;
        }
        ++loaded;
    }
    REQUIRE(loaded > 10);
    auto xr_sf = rebalancing_feasibility_check(sf, X);
    std::vector<double> total = X.row_sums();
    for (int a = 0; a < sf.num_arcs(); ++a) {
        CHECK(xr_sf[a] >= -1e-12);
        total[a] += xr_sf[a];
    }
    double scale = 0.0;
    for (double v : total) scale = std::max(scale, v);
    for (double v : divergence(sf, total)) CHECK(std::abs(v) <= 1e-8 * std::max(1.0, scale));
}

TEST_CASE("self-pool-only catalog equals routing the demand with halved vehicle rates") {
    std::mt19937_64 rng(11);
    Network net = oracle::random_network(rng, 6, 10, 3.0, 12.0);
    RequestSet poolable{{1, 4, 6.0, RequestClass::amod_poolable},
                        {2, 6, 3.0, RequestClass::amod_poolable}};
    ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
    cat.pairs.clear();  // force self-pool only

    auto law = TravelTimeLaw::two_line(net, 1.0);
    ConvexProgram prog = assemble_joint(net, cat, law, 1.0, zeros(net));
    FlowSolution joint = solve(prog, {1e-6, 20000});

    Matrix halved(net.num_vertices(), net.num_vertices());
    for (const Request& r : poolable) {
        halved(r.destination - 1, r.origin - 1) += r.rate / 2.0;
        halved(r.origin - 1, r.origin - 1) -= r.rate / 2.0;
    }
    FlowSolution routed = solve_routing(net, halved, law, 1.0, zeros(net), {1e-6, 20000});
    CHECK(joint.objective == doctest::Approx(routed.objective).epsilon(1e-5));
}

TEST_CASE("pwl objective is convex along feasible segments") {
    std::mt19937_64 rng(17);
    Network net = oracle::random_network(rng, 6, 10, 2.0, 8.0);
    auto law = TravelTimeLaw::two_line(net, 1.0);
    Matrix d(6, 6);
    d(3, 0) = 5.0;
    d(0, 0) = -5.0;
    d(5, 1) = 2.0;
    d(1, 1) = -2.0;

    FlowSolution z1 = solve_routing(net, d, law, 1.0, zeros(net));
    FlowSolution z2 = solve_routing(net, d, law, 0.0, zeros(net));
    auto eval = [&](double lam) {
        Matrix X = z1.X;
        X.scale(1.0 - lam);
        X.axpy(lam, z2.X);
        std::vector<double> xr(net.num_arcs());
        for (int a = 0; a < net.num_arcs(); ++a)
            xr[a] = (1.0 - lam) * z1.x_r[a] + lam * z2.x_r[a];
        std::vector<double> t = travel_time_vector(net, X, xr, zeros(net), law);
        return objective(t, X, xr, 1.0);
    };
    const double j0 = eval(0.0), j1 = eval(1.0);
    for (double lam : {0.25, 0.5, 0.75})
        CHECK(eval(lam) <= lam * j1 + (1.0 - lam) * j0 + 1e-9 * (1.0 + std::abs(j0)));
}

TEST_CASE("local gamma perturbations never improve the joint optimum") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 3; ++trial) {
        Network net = oracle::random_network(rng, 6, 9, 3.0, 10.0);
        std::uniform_int_distribution<int> vtx(1, 6);
        RequestSet poolable;
        while (poolable.size() < 2) {
            const int o = vtx(rng), d = vtx(rng);
            if (o == d) continue;
            bool dup = false;
            for (const Request& r : poolable) dup = dup || (r.origin == o && r.destination == d);
            if (!dup) poolable.push_back({o, d, 4.0, RequestClass::amod_poolable});
        }
        ConfigCatalog cat = precompute_catalog(net, poolable, kInf);
        auto law = TravelTimeLaw::two_line(net, 1.0);
        ConvexProgram prog = assemble_joint(net, cat, law, 1.0, zeros(net));
        FlowSolution sol = solve(prog, {1e-6, 20000});
        const double tol = 1e-5;

        // move eps between two configurations of the same pair
        for (const PairCatalog& p : cat.pairs) {
            if (p.options.size() < 2) continue;
            const double eps = 1e-3 * 4.0;
            std::map<GammaKey, double> gamma = sol.gamma;
            GammaKey from{p.m, p.n, p.options[0].c};
            GammaKey to{p.m, p.n, p.options[1].c};
            if (gamma[from] < eps) std::swap(from, to);
            if (gamma[from] < eps) continue;
            gamma[from] -= eps;
            gamma[to] += eps;
            Matrix drp = drp_from_gamma(cat, gamma, net.num_vertices());
            FlowSolution re = solve_routing(net, drp, law, 1.0, zeros(net), {1e-6, 20000});
            CHECK(re.objective >= sol.objective - tol * (1.0 + std::abs(sol.objective)));
        }
        // move eps from a pair configuration into the two self-pools
        for (const PairCatalog& p : cat.pairs) {
            GammaKey from{p.m, p.n, p.options[0].c};
            std::map<GammaKey, double> gamma = sol.gamma;
            const double eps = 1e-3 * 4.0;
            if (gamma[from] < eps) continue;
            gamma[from] -= eps;
            gamma[{p.m, p.m, 1}] += eps / 2.0;
            gamma[{p.n, p.n, 1}] += eps / 2.0;
            Matrix drp = drp_from_gamma(cat, gamma, net.num_vertices());
            FlowSolution re = solve_routing(net, drp, law, 1.0, zeros(net), {1e-6, 20000});
            CHECK(re.objective >= sol.objective - tol * (1.0 + std::abs(sol.objective)));
        }
    }
}

TEST_CASE("joint optimum beats a dense gamma grid with re-optimized flows") {
    std::mt19937_64 rng(29);
    int done = 0;
    while (done < 3) {
        Network net = oracle::random_network(rng, 6, 9, 3.0, 10.0);
        std::uniform_int_distribution<int> vtx(1, 6);
        RequestSet poolable;
        while (poolable.size() < 2) {
            const int o = vtx(rng), d = vtx(rng);
            if (o == d) continue;
            bool dup = false;
            for (const Request& r : poolable) dup = dup || (r.origin == o && r.destination == d);
            if (!dup) poolable.push_back({o, d, 5.0, RequestClass::amod_poolable});
        }
        ConfigCatalog cat = precompute_catalog(net, poolable, 0.15);
        const std::size_t pair_vars = cat.num_pair_options();
        if (pair_vars == 0 || pair_vars > 3) continue;
        ++done;

        auto law = TravelTimeLaw::two_line(net, 1.0);
        ConvexProgram prog = assemble_joint(net, cat, law, 1.0, zeros(net));
        FlowSolution sol = solve(prog, {1e-6, 20000});

        std::vector<GammaKey> keys;
        for (const PairCatalog& p : cat.pairs)
            for (const ConfigOption& o : p.options) keys.push_back({p.m, p.n, o.c});
        const double step = 5.0 / 10.0;
        std::vector<int> idx(keys.size(), 0);
        for (;;) {
            std::map<GammaKey, double> gamma;
            std::vector<double> cover(poolable.size(), 0.0);
            bool ok = true;
            for (std::size_t k = 0; k < keys.size() && ok; ++k) {
                const double v = idx[k] * step;
                if (v > 0.0) {
                    gamma[keys[k]] += v;
                    cover[std::get<0>(keys[k])] += v;
                    cover[std::get<1>(keys[k])] += v;
                }
                ok = cover[std::get<0>(keys[k])] <= 5.0 + 1e-9 &&
                     cover[std::get<1>(keys[k])] <= 5.0 + 1e-9;
            }
            if (ok) {
                for (std::size_t m = 0; m < poolable.size(); ++m)
                    if (5.0 - cover[m] > 1e-12)
                        gamma[{static_cast<int>(m), static_cast<int>(m), 1}] =
                            (5.0 - cover[m]) / 2.0;
                Matrix drp = drp_from_gamma(cat, gamma, net.num_vertices());
                FlowSolution re = solve_routing(net, drp, law, 1.0, zeros(net), {1e-6, 10000});
                CHECK(sol.objective <= re.objective + 1e-4 * (1.0 + std::abs(re.objective)));
            }
            std::size_t k = 0;
            for (; k < idx.size(); ++k) {
                if (++idx[k] <= 10) break;
                idx[k] = 0;
            }
            if (k == idx.size()) break;
        }
    }
}
