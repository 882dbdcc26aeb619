#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "amod/io.hpp"
#include "amod/network.hpp"
#include "oracles.hpp"

using namespace amod;

namespace {

Network two_node() { return Network(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}}); }

Network line3() {
    return Network(3, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {2, 3, 2.0, 10.0, 0.15, 4.0}});
}

}  // namespace

TEST_CASE("network validation") {
    CHECK_THROWS(Network(2, {{1, 1, 1.0, 5.0, 0.15, 4.0}}));   // self loop
    CHECK_THROWS(Network(2, {{1, 3, 1.0, 5.0, 0.15, 4.0}}));   // bad endpoint
    CHECK_THROWS(Network(2, {{1, 2, 0.0, 5.0, 0.15, 4.0}}));   // t0 <= 0
    CHECK_THROWS(Network(2, {{1, 2, 1.0, -1.0, 0.15, 4.0}}));  // capacity <= 0
}

TEST_CASE("incidence matches definition") {
    Network net = two_node();
    IncidenceView b = incidence(net);
    CHECK(b.entry(1, 0) == 1);
    CHECK(b.entry(2, 0) == -1);

    // column sums vanish
    Network cyc(3, {{1, 2, 1, 1, 0.15, 4}, {2, 3, 1, 1, 0.15, 4}, {3, 1, 1, 1, 0.15, 4}});
    IncidenceView bc = incidence(cyc);
    for (int a = 0; a < cyc.num_arcs(); ++a) {
        int col = 0;
        for (int v = 1; v <= 3; ++v) col += bc.entry(v, a);
        CHECK(col == 0);
    }
    // balanced 3-cycle: row sums vanish too
    for (int v = 1; v <= 3; ++v) {
        int row = 0;
        for (int a = 0; a < cyc.num_arcs(); ++a) row += bc.entry(v, a);
        CHECK(row == 0);
    }
}

TEST_CASE("divergence equals direct outflow-minus-inflow bookkeeping") {
    std::mt19937_64 rng(7);
    Network net = oracle::random_network(rng, 8, 12);
    std::uniform_real_distribution<double> flow(0.0, 4.0);
    std::vector<double> f(net.num_arcs());
    for (double& v : f) v = flow(rng);

    const std::vector<double> div = divergence(net, f);
    IncidenceView b = incidence(net);
    for (int v = 1; v <= net.num_vertices(); ++v) {
        double direct = 0.0;
        for (int a = 0; a < net.num_arcs(); ++a) direct += b.entry(v, a) * f[a];
        CHECK(div[v - 1] == doctest::Approx(direct).epsilon(1e-14));
    }
}

TEST_CASE("shortest paths on small graphs") {
    Network net = line3();
    auto tree = shortest_paths(net, {1.0, 2.0}, 1);
    CHECK(tree.dist[0] == 0.0);
    CHECK(tree.dist[2] == doctest::Approx(3.0));
    CHECK(tree_path(net, tree, 1, 1).empty());
    CHECK(tree_path(net, tree, 1, 3).size() == 2);

    CHECK_THROWS(shortest_paths(net, {-1.0, 2.0}, 1));
}

TEST_CASE("shortest paths break ties by lowest arc index") {
    Network net(2, {{1, 2, 1.0, 5, 0.15, 4}, {1, 2, 1.0, 5, 0.15, 4}});
    auto tree = shortest_paths(net, {3.0, 3.0}, 1);
    CHECK(tree.pred_arc[1] == 0);
}

TEST_CASE("shortest paths match exhaustive enumeration on random graphs") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 12; ++trial) {
        Network net = oracle::random_network(rng, 10, 14);
        std::uniform_real_distribution<double> cost(0.01, 1.0);
        std::vector<double> w(net.num_arcs());
        for (double& v : w) v = cost(rng);
        auto tree = shortest_paths(net, w, 1);
        for (int d = 1; d <= net.num_vertices(); ++d) {
            const double ref = oracle::brute_force_shortest(net, w, 1, d);
            CHECK(tree.dist[d - 1] == doctest::Approx(ref).epsilon(1e-12));
        }
        // Bellman condition with equality along predecessor arcs
        for (int a = 0; a < net.num_arcs(); ++a) {
            const Arc& arc = net.arc(a);
            CHECK(tree.dist[arc.head - 1] <= tree.dist[arc.tail - 1] + w[a] + 1e-12);
        }
        for (int v = 1; v <= net.num_vertices(); ++v) {
            const int a = tree.pred_arc[v - 1];
            if (a < 0) continue;
            CHECK(tree.dist[v - 1] ==
                  doctest::Approx(tree.dist[net.arc(a).tail - 1] + w[a]).epsilon(1e-12));
        }
    }
}

TEST_CASE("tntp parsing of a two-node fixture") {
    const std::string net_text =
        "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n"
        "~ from to cap len fft b power speed toll type ;\n"
        "1 2 10.0 1 1.0 0.15 4 0 0 1 ;\n";
    const std::string trips_text =
        "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 2 : 300.0;\n";
    auto [net, requests] = parse_tntp(net_text, trips_text);
    CHECK(net.num_vertices() == 2);
    CHECK(net.num_arcs() == 1);
    CHECK(net.arc(0).t0 == doctest::Approx(1.0));
    CHECK(net.arc(0).capacity == doctest::Approx(10.0));
    REQUIRE(requests.size() == 1);
    CHECK(requests[0].origin == 1);
    CHECK(requests[0].destination == 2);
    CHECK(requests[0].rate == doctest::Approx(300.0));
}

TEST_CASE("tntp parse errors") {
    CHECK_THROWS(parse_tntp_net("1 2 10.0 1 1.0 ;\n"));  // missing header
    CHECK_THROWS(parse_tntp_net(
        "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 2 -10.0 1 1.0\n"));
    CHECK_THROWS(parse_tntp_net(
        "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 2 10.0 1 0.0\n"));
    CHECK_THROWS(parse_tntp_trips("Origin 1\n 9 : 5.0;\n", 2));  // unknown node
}

TEST_CASE("sioux falls fixture counts") {
    auto [net, requests] = parse_tntp(read_file(std::string(DATA_DIR) + "/SiouxFalls_net.tntp"),
                                      read_file(std::string(DATA_DIR) + "/SiouxFalls_trips.tntp"));
    CHECK(net.num_vertices() == 24);
    CHECK(net.num_arcs() == 76);
    CHECK(requests.size() == 528);
    for (const Arc& a : net.arcs()) {
        CHECK(a.bpr_alpha == doctest::Approx(0.15));
        CHECK(a.bpr_beta == doctest::Approx(4.0));
    }
}

TEST_CASE("parse-serialize-parse round trip") {
    auto [net, requests] = parse_tntp(read_file(std::string(DATA_DIR) + "/SiouxFalls_net.tntp"),
                                      read_file(std::string(DATA_DIR) + "/SiouxFalls_trips.tntp"));
    auto [net2, requests2] = parse_tntp(serialize_tntp_net(net),
                                        serialize_tntp_trips(requests, net.num_vertices()));
    REQUIRE(net2.num_arcs() == net.num_arcs());
    for (int a = 0; a < net.num_arcs(); ++a) {
        CHECK(net2.arc(a).tail == net.arc(a).tail);
        CHECK(net2.arc(a).head == net.arc(a).head);
        CHECK(net2.arc(a).t0 == net.arc(a).t0);
        CHECK(net2.arc(a).capacity == net.arc(a).capacity);
    }
    REQUIRE(requests2.size() == requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        CHECK(requests2[i].origin == requests[i].origin);
        CHECK(requests2[i].destination == requests[i].destination);
        CHECK(requests2[i].rate == requests[i].rate);
    }
}

TEST_CASE("json network round trip") {
    Network net = line3();
    Network back = parse_network_json(serialize_network_json(net));
    CHECK(back.num_vertices() == 3);
    CHECK(back.num_arcs() == 2);
    CHECK(back.arc(1).t0 == net.arc(1).t0);
}
