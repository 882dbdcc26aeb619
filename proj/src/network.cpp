#include "amod/network.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace amod {

Network::Network(int num_vertices, std::vector<Arc> arcs)
    : nv_(num_vertices), arcs_(std::move(arcs)), out_(num_vertices) {
    if (num_vertices <= 0) throw std::invalid_argument("network: need at least one vertex");
    for (std::size_t i = 0; i < arcs_.size(); ++i) {
        const Arc& a = arcs_[i];
        if (a.tail < 1 || a.tail > nv_ || a.head < 1 || a.head > nv_)
            throw std::invalid_argument("network: arc " + std::to_string(i) +
                                        " has an endpoint outside 1..|V|");
        if (a.tail == a.head)
            throw std::invalid_argument("network: self-loop arc at index " + std::to_string(i));
        if (!(a.t0 > 0.0))
            throw std::invalid_argument("network: nonpositive free-flow time on arc " +
                                        std::to_string(i));
        if (!(a.capacity > 0.0))
            throw std::invalid_argument("network: nonpositive capacity on arc " +
                                        std::to_string(i));
        out_[a.tail - 1].push_back(static_cast<int>(i));
    }
}

std::vector<double> Network::free_flow_times() const {
    std::vector<double> t(arcs_.size());
    for (std::size_t i = 0; i < arcs_.size(); ++i) t[i] = arcs_[i].t0;
    return t;
}

IncidenceView incidence(const Network& net) {
    return IncidenceView{net.num_vertices(), net.num_arcs(), &net};
}

std::vector<double> divergence(const Network& net, const std::vector<double>& arc_flow) {
    if (static_cast<int>(arc_flow.size()) != net.num_arcs())
        throw std::invalid_argument("divergence: flow vector length mismatch");
    std::vector<double> d(net.num_vertices(), 0.0);
    for (int a = 0; a < net.num_arcs(); ++a) {
        d[net.arc(a).tail - 1] += arc_flow[a];
        d[net.arc(a).head - 1] -= arc_flow[a];
    }
    return d;
}

ShortestPathTree shortest_paths(const Network& net, const std::vector<double>& arc_costs,
                                int origin) {
    const int nv = net.num_vertices();
    if (static_cast<int>(arc_costs.size()) != net.num_arcs())
        throw std::invalid_argument("shortest_paths: cost vector length mismatch");
    for (double c : arc_costs)
        if (c < 0.0) throw std::invalid_argument("shortest_paths: negative arc cost");
    if (origin < 1 || origin > nv) throw std::invalid_argument("shortest_paths: bad origin");

    ShortestPathTree tree;
    tree.dist.assign(nv, kInf);
    tree.pred_arc.assign(nv, -1);
    tree.dist[origin - 1] = 0.0;

    using Item = std::pair<double, int>;  // (dist, vertex)
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    heap.push({0.0, origin});
    std::vector<char> done(nv, 0);

    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (done[v - 1]) continue;
        done[v - 1] = 1;
        for (int a : net.out_arcs(v)) {
            const int h = net.arc(a).head;
            const double nd = d + arc_costs[a];
            if (nd < tree.dist[h - 1]) {
                tree.dist[h - 1] = nd;
                tree.pred_arc[h - 1] = a;
                heap.push({nd, h});
            } else if (nd == tree.dist[h - 1] && tree.pred_arc[h - 1] > a) {
                tree.pred_arc[h - 1] = a;  // equal cost: keep the lowest arc index
            }
        }
    }
    return tree;
}

std::vector<int> tree_path(const Network& net, const ShortestPathTree& tree, int origin,
                           int dest) {
    std::vector<int> path;
    int v = dest;
    while (v != origin) {
        const int a = tree.pred_arc[v - 1];
        if (a < 0)
            throw std::runtime_error("tree_path: vertex " + std::to_string(dest) +
                                     " unreachable from " + std::to_string(origin));
        path.push_back(a);
        v = net.arc(a).tail;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace amod
