#pragma once

#include <optional>
#include <vector>

#include "amod/assign_greedy.hpp"
#include "amod/congestion.hpp"
#include "amod/demand.hpp"
#include "amod/joint_qp.hpp"
#include "amod/network.hpp"
#include "amod/pooling.hpp"

namespace amod {

// Full rate of every request loaded onto its shortest path under t.
std::vector<double> all_or_nothing(const Network& net, const std::vector<double>& t,
                                   const RequestSet& requests);

struct UeOptions {
    TravelTimeLaw law;  // private drivers see the true BPR law by default
    double gap_tol = 1e-4;
    int max_iter = 500;
    bool track_od_flows = false;
    // with od tracking: pairwise path swaps after the FW loop until every
    // used path sits within refine_factor*gap_tol of its OD minimum
    bool refine_paths = true;
    int refine_sweeps = 60;
    double refine_factor = 4.0;
};

struct EquilibriumReport {
    std::vector<double> x_p;
    double relative_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> min_od_time;               // per request, final times
    std::vector<double> beckmann_trace;
    std::vector<std::vector<double>> od_flows;     // per request when tracked
    std::vector<double> final_times;
};

// Frank-Wolfe on the Beckmann potential with the AMoD flows as a fixed
// background. relative gap = (t'x - sum rate*minODtime) / t'x.
EquilibriumReport solve_ue(const Network& net, const RequestSet& requests,
                           const std::vector<double>& background, const UeOptions& options = {});

// Beckmann potential sum_a int_0^{x_a} t_a(bg_a + s) ds.
double beckmann_value(const Network& net, const TravelTimeLaw& law,
                      const std::vector<double>& background, const std::vector<double>& x);

// Decompose one request's arc flow into paths by successive shortest paths
// within the flow support and check every used path against the OD minimum.
bool wardrop_used_paths_ok(const Network& net, const Request& request,
                           const std::vector<double>& od_flow, const std::vector<double>& t,
                           double cost_tolerance, double flow_eps = 1e-6);

enum class AssignmentMode { unaware_greedy, aware_joint };

struct BilevelOptions {
    AssignmentMode mode = AssignmentMode::aware_joint;
    double rho = 1.0;
    TravelTimeLaw operator_law;  // typically the PWL surrogate
    UeOptions ue;
    double tol_obj = 1e-2;
    int max_rounds = 10;
    double tbar = 10.0 / 60.0;
    SolveOptions solver;
    double fp_tol = 1e-3;
    int fp_max_iter = 20;
};

struct BilevelResult {
    FlowSolution operator_solution;
    EquilibriumReport private_report;
    std::vector<double> objective_trace;  // operator J per round
    int rounds = 0;
    bool converged = false;
    Matrix drp;                    // realized ride-pooling demand matrix
    PoolingOutcome pooling;
};

// Alternate the operator problem (joint QP or greedy fixed point, private
// flows frozen) with the private user equilibrium (AMoD flows frozen) until
// the operator objective settles.
BilevelResult bilevel_solve(const Network& net, const RequestSet& private_requests,
                            const RequestSet& amod_individual, const ConfigCatalog& catalog,
                            const BilevelOptions& options);

}  // namespace amod
