#include "amod/mcflow.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>

namespace amod {

namespace {

struct Edge {
    int to = 0;
    double cap = 0.0;
    double cost = 0.0;
};

}  // namespace

McfResult min_cost_divergence_flow(const Network& net, const std::vector<double>& arc_costs,
                                   const std::vector<double>& required, double tol) {
    const int nv = net.num_vertices();
    const int na = net.num_arcs();
    if (static_cast<int>(arc_costs.size()) != na || static_cast<int>(required.size()) != nv)
        throw std::invalid_argument("mcflow: dimension mismatch");
    for (double c : arc_costs)
        if (c < 0.0) throw std::invalid_argument("mcflow: negative arc cost");

    double supply = 0.0, demand = 0.0;
    for (double r : required) (r < 0.0 ? supply : demand) += std::abs(r);
    const double scale = std::max(1.0, std::max(supply, demand));
    if (std::abs(supply - demand) > 1e-6 * scale)
        throw std::invalid_argument("mcflow: unbalanced requirement");

    // residual graph nodes: 0 = super source, 1..nv = vertices, nv+1 = super sink
    const int S = 0, T = nv + 1, n = nv + 2;
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj(n);
    auto add_edge = [&](int u, int v, double cap, double cost) {
        adj[u].push_back(static_cast<int>(edges.size()));
        edges.push_back({v, cap, cost});
        adj[v].push_back(static_cast<int>(edges.size()));
        edges.push_back({u, 0.0, -cost});
    };

    const double big = supply + demand + 1.0;
    for (int a = 0; a < na; ++a)
        add_edge(net.arc(a).tail, net.arc(a).head, big, arc_costs[a]);  // edge 2a
    for (int v = 1; v <= nv; ++v) {
        const double r = required[v - 1];
        if (r < -tol * scale) add_edge(S, v, -r, 0.0);
        else if (r > tol * scale) add_edge(v, T, r, 0.0);
    }

    std::vector<double> pot(n, 0.0), dist(n);
    std::vector<int> pred(n);
    double remaining = supply;
    double total_cost = 0.0;

    while (remaining > tol * scale) {
        // Dijkstra on reduced costs
        dist.assign(n, kInf);
        pred.assign(n, -1);
        dist[S] = 0.0;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        heap.push({0.0, S});
        std::vector<char> done(n, 0);
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (done[u]) continue;
            done[u] = 1;
            for (int e : adj[u]) {
                if (edges[e].cap <= tol * scale) continue;
                const int v = edges[e].to;
                const double rc = std::max(0.0, edges[e].cost + pot[u] - pot[v]);
                if (d + rc < dist[v]) {
                    dist[v] = d + rc;
                    pred[v] = e;
                    heap.push({dist[v], v});
                }
            }
        }
        if (pred[T] < 0)
            throw std::runtime_error(
                "mcflow: requirement unreachable (disconnected network component)");
        for (int v = 0; v < n; ++v)
            if (dist[v] < kInf) pot[v] += dist[v];

        double push = remaining;
        for (int v = T; v != S; v = edges[pred[v] ^ 1].to) push = std::min(push, edges[pred[v]].cap);
        for (int v = T; v != S; v = edges[pred[v] ^ 1].to) {
            edges[pred[v]].cap -= push;
            edges[pred[v] ^ 1].cap += push;
            total_cost += push * edges[pred[v]].cost;
        }
        remaining -= push;
    }

    McfResult out;
    out.arc_flow.assign(na, 0.0);
    for (int a = 0; a < na; ++a) out.arc_flow[a] = edges[2 * a + 1].cap;  // reverse cap = flow
    out.cost = total_cost;
    return out;
}

}  // namespace amod
