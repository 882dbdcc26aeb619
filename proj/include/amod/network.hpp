#pragma once

#include <limits>
#include <string>
#include <vector>

namespace amod {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Directed road link. Vertices are 1-based throughout, matching the usual
// node numbering of transportation network files.
struct Arc {
    int tail = 0;
    int head = 0;
    double t0 = 0.0;        // free-flow travel time [h]
    double capacity = 0.0;  // [veh/h]
    double bpr_alpha = 0.15;
    double bpr_beta = 4.0;
};

// Immutable road graph. Arc ordering is fixed at construction and shared by
// every flow vector in the project.
class Network {
public:
    Network(int num_vertices, std::vector<Arc> arcs);

    int num_vertices() const { return nv_; }
    int num_arcs() const { return static_cast<int>(arcs_.size()); }
    const Arc& arc(int a) const { return arcs_[a]; }
    const std::vector<Arc>& arcs() const { return arcs_; }

    // Arc indices leaving vertex v (1-based), ascending.
    const std::vector<int>& out_arcs(int v) const { return out_[v - 1]; }

    std::vector<double> free_flow_times() const;

private:
    int nv_ = 0;
    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> out_;
};

// Node-arc incidence: +1 where the arc leaves the vertex, -1 where it enters.
struct IncidenceView {
    int nv = 0;
    int na = 0;
    const Network* net = nullptr;

    int entry(int vertex, int arc) const {
        const Arc& a = net->arc(arc);
        if (a.tail == vertex) return +1;
        if (a.head == vertex) return -1;
        return 0;
    }
};

IncidenceView incidence(const Network& net);

// B*f with the orientation of `incidence`: outflow minus inflow per vertex.
// Index 0 of the result corresponds to vertex 1.
std::vector<double> divergence(const Network& net, const std::vector<double>& arc_flow);

struct ShortestPathTree {
    std::vector<double> dist;  // [nv], indexed by vertex-1, +inf if unreachable
    std::vector<int> pred_arc; // [nv], -1 at the origin / unreachable vertices
};

// Label-setting search from `origin` under nonnegative arc costs. Equal-cost
// ties resolve to the lowest predecessor arc index, which keeps every
// downstream precomputation reproducible.
ShortestPathTree shortest_paths(const Network& net, const std::vector<double>& arc_costs,
                                int origin);

// Arc indices of the tree path origin->dest; empty when dest is the origin.
// Throws if dest is unreachable.
std::vector<int> tree_path(const Network& net, const ShortestPathTree& tree, int origin,
                           int dest);

}  // namespace amod
