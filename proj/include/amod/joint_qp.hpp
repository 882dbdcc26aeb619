#pragma once

#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "amod/congestion.hpp"
#include "amod/demand.hpp"
#include "amod/matrix.hpp"
#include "amod/mcflow.hpp"
#include "amod/network.hpp"
#include "amod/pooling.hpp"

namespace amod {

struct OdDemand {
    int origin = 0;
    int dest = 0;
    double rate = 0.0;
};

// Joint assignment+routing program (catalog present) or plain routing program
// (catalog absent). Constraints: flow conservation per commodity against
// D^rp(gamma) plus the fixed demand, vehicle balance of X*1 + x_r, demand
// equalities over the gamma block, nonnegativity.
struct ConvexProgram {
    const Network* net = nullptr;
    TravelTimeLaw law;
    double rho = 1.0;
    std::vector<double> x_p;            // fixed private flows per arc
    const ConfigCatalog* catalog = nullptr;
    std::vector<OdDemand> fixed_demand;  // always-routed demand
};

struct SolverDiagnostics {
    int iterations = 0;
    double fw_gap = kInf;
    double conservation_residual = 0.0;
    double rebalance_residual = 0.0;
    double demand_residual = 0.0;
    bool converged = false;
};

using GammaKey = std::tuple<int, int, int>;  // (m, n, c); self-pool is (m, m, 1)

struct FlowSolution {
    Matrix X;                       // |A| x |V| active flows by origin column
    std::vector<double> x_r;        // rebalancing flow
    std::vector<double> x_p;        // private flow the program was solved against
    std::vector<double> t;          // realized travel times under the program law
    double objective = 0.0;
    std::map<GammaKey, double> gamma;
    SolverDiagnostics diag;
};

ConvexProgram assemble_joint(const Network& net, const ConfigCatalog& catalog,
                             const TravelTimeLaw& law, double rho,
                             const std::vector<double>& x_p,
                             const Matrix* fixed_demand = nullptr);

struct SolveOptions {
    double tol = 1e-6;      // relative Frank-Wolfe gap
    int max_iter = 3000;
};

// Away-step Frank-Wolfe over the flow polytope. The linear subproblem is
// solved exactly: shortest paths price the routing of every demand atom and a
// small LP allocates the gamma block jointly with the rebalancing arcs.
FlowSolution solve(const ConvexProgram& program, const SolveOptions& options = {});

FlowSolution solve_routing(const Network& net, const Matrix& drp, const TravelTimeLaw& law,
                           double rho, const std::vector<double>& x_p,
                           const SolveOptions& options = {});

// Any x_r >= 0 balancing X*1: min-cost flow on the excess divergence under
// free-flow times. Existence certificate and warm start.
std::vector<double> rebalancing_feasibility_check(const Network& net, const Matrix& X);

// max_j max_i | (inflow-outflow)_i of column j - D(i,j) |
double conservation_residual(const Network& net, const Matrix& X, const Matrix& demand);

// Demand list of the strictly positive off-diagonal entries of D (column =
// origin). Throws when a column does not sum to zero or an off-diagonal entry
// is negative.
std::vector<OdDemand> demand_list(const Matrix& demand, double tol = 1e-6);

// Sum of gamma-weighted config demand matrices.
Matrix drp_from_gamma(const ConfigCatalog& catalog, const std::map<GammaKey, double>& gamma,
                      int num_vertices);

}  // namespace amod
