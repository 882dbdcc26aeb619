#pragma once

#include <vector>

#include "amod/joint_qp.hpp"
#include "amod/matrix.hpp"
#include "amod/network.hpp"
#include "amod/pooling.hpp"

namespace amod {

// Unit improvements of pooling each cataloged pair versus serving both
// requests individually, evaluated at fixed travel times.
struct PairScores {
    Matrix delta;                               // symmetric, [h per unit demand]
    std::vector<std::vector<int>> best_config;  // chosen c per (m,n); 0 = not scorable
    std::vector<double> direct_cost;            // J~ of each request alone
};

PairScores score_all_pairs(const Network& net, const ConfigCatalog& catalog,
                           const std::vector<double>& t_eval);

// Delta J~ of one pair under t_eval; throws when m != n has no cataloged
// feasible configuration.
double pair_improvement(const ConfigCatalog& catalog, const Network& net,
                        const std::vector<double>& t_eval, int m, int n);

struct GreedyAssignment {
    Matrix beta;    // demand of r_m allocated to pool with r_n
    Matrix gamma;   // effective expected pooled demand, symmetric
    std::vector<std::vector<int>> best_config;
    std::vector<double> residual;  // alpha' at termination
    double total_improvement = 0.0;
    int iterations = 0;
};

// Greedy allocation: repeatedly give the pair with the highest remaining
// improvement its maximum pooling demand, discounted by the Poisson matching
// probability at waiting threshold tbar [h].
GreedyAssignment greedy_assign(const Network& net, const ConfigCatalog& catalog,
                               const std::vector<double>& t_eval, double tbar);

// Core loop over externally supplied scores.
GreedyAssignment greedy_core(const std::vector<double>& rates, const Matrix& delta,
                             const std::vector<std::vector<int>>& best_config, double tbar);

// D^rp from the greedy gamma: pooled flows on their best configurations plus
// the demand that was not pooled, served directly.
Matrix assemble_drp_with_leftovers(const Matrix& demand, const GreedyAssignment& assignment,
                                   const ConfigCatalog& catalog);

struct FixedPointOptions {
    TravelTimeLaw law;
    double rho = 1.0;
    double tbar = 10.0 / 60.0;  // [h]
    double tol = 1e-3;
    int max_iter = 20;
    SolveOptions solver;
};

struct FixedPointResult {
    Matrix drp;
    FlowSolution solution;
    GreedyAssignment assignment;
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
};

// Congestion-unaware assignment made congestion-consistent: alternate greedy
// scoring at the current travel times with congestion-aware routing of the
// resulting D^rp until the objective settles.
FixedPointResult fixed_point_assignment(const Network& net, const ConfigCatalog& catalog,
                                        const std::vector<double>& x_p,
                                        const Matrix* fixed_demand,
                                        const FixedPointOptions& options);

// Shared view of a pooling outcome used by the metrics layer.
struct PoolAllocationEntry {
    int m = 0, n = 0, c = 0;
    double rate = 0.0;
};

struct PoolingOutcome {
    std::vector<PoolAllocationEntry> allocations;
    std::vector<double> leftover;  // direct-served rate per request
};

PoolingOutcome outcome_from_greedy(const GreedyAssignment& assignment,
                                   const ConfigCatalog& catalog);
PoolingOutcome outcome_from_gamma(const std::map<GammaKey, double>& gamma,
                                  const ConfigCatalog& catalog);

}  // namespace amod
