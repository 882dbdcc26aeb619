#pragma once

#include <vector>

#include "amod/network.hpp"

namespace amod {

struct McfResult {
    std::vector<double> arc_flow;  // per network arc
    double cost = 0.0;
};

// Minimum-cost nonnegative arc flow x with prescribed divergence:
// inflow(x) - outflow(x) at vertex v equals required[v-1]. Arc costs must be
// nonnegative; `required` must sum to ~0. Successive shortest paths with
// Johnson potentials. Throws when some requirement cannot be met
// (disconnected components).
McfResult min_cost_divergence_flow(const Network& net, const std::vector<double>& arc_costs,
                                   const std::vector<double>& required, double tol = 1e-12);

}  // namespace amod
