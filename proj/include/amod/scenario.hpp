#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amod/assign_greedy.hpp"
#include "amod/demand.hpp"
#include "amod/network.hpp"
#include "amod/pooling.hpp"
#include "amod/tap.hpp"

namespace amod {

struct ScenarioConfig {
    std::string network_path;
    std::string trips_path;          // TNTP trips; or
    std::string requests_json_path;  // inline request list
    std::string net_time_unit = "hours";  // "minutes" rescales t0 on load
    double dbar_minutes = 10.0;
    double tbar_minutes = 10.0;
    double rho = 1.0;
    std::vector<double> phi_list{0.7};
    std::vector<double> psi_list{1.0};
    std::vector<std::string> modes{"aware_joint"};
    double demand_scale = 1.0;
    std::string law = "pwl";  // operator law: "bpr" | "pwl"
    double theta = 1.0;
    double pair_rate_floor = 0.0;
    double tol_obj = 1e-2;
    int max_rounds = 10;
    double solver_tol = 1e-6;
    int solver_max_iter = 3000;
    double ue_gap_tol = 1e-4;
    int ue_max_iter = 500;
    double fp_tol = 1e-3;
    int fp_max_iter = 20;
    std::string out_dir = "out";
};

ScenarioConfig parse_scenario_json(const std::string& json_text);
void validate(const ScenarioConfig& config);

struct ScenarioInputs {
    Network network;
    RequestSet requests;
};

// Loads network + demand, applies the time-unit conversion and demand scale.
ScenarioInputs load_scenario_inputs(const ScenarioConfig& config);

struct MetricsRow {
    double phi = 0.0;
    double psi = 0.0;
    std::string mode;
    std::optional<double> avg_private_min;
    std::optional<double> avg_individual_min;
    std::optional<double> avg_pooled_min;
    double objective = 0.0;
    double sigma_max = 0.0;
    double sigma_mean = 0.0;
    int links_congested = 0;
    int rounds = 0;
    bool converged = false;
    std::string status = "ok";
    double wall_seconds = 0.0;  // reported in the trace file, not in metrics.csv
};

// Demand-weighted mean realized travel time per class, in minutes, under the
// realized equilibrium times. Pooled users accumulate their legs along the
// assigned serving order.
double avg_time_private_minutes(const Network& net, const std::vector<double>& t,
                                const RequestSet& requests);
double avg_time_individual_minutes(const Network& net, const std::vector<double>& t,
                                   const RequestSet& requests);
double avg_time_pooled_minutes(const Network& net, const std::vector<double>& t,
                               const ConfigCatalog& catalog, const PoolingOutcome& outcome);

// Objective of loading drp (plus rebalancing) on free-flow shortest paths and
// paying the congested times that loading produces.
double freeflow_routing_objective(const Network& net, const Matrix& drp, double rho,
                                  const std::vector<double>& x_p);

struct GridPointOutput {
    MetricsRow row;
    std::string links_csv;
    std::string trace_json;
    std::string links_name;
    std::string trace_name;
};

GridPointOutput run_grid_point(const Network& net, const RequestSet& all_requests,
                               const ScenarioConfig& config, double phi, double psi,
                               const std::string& mode);

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

// Runs the whole (phi, psi, mode) grid, writes metrics.csv plus per-point
// links/trace files under out_dir. Returns false when any grid point failed.
bool run_scenario(const ScenarioConfig& config, const std::string& out_dir_override = "",
                  int jobs = 1);

// Aware-vs-unaware comparison at every (phi, psi): both assignments, link
// congestion difference files and a summary JSON. Returns false on failure.
bool compare_assignment(const ScenarioConfig& config, const std::string& out_dir_override = "");

std::string format_double(double v);

}  // namespace amod
