#include "amod/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "amod/io.hpp"
#include "amod/mcflow.hpp"

namespace amod {

namespace {

TravelTimeLaw operator_law(const ScenarioConfig& config, const Network& net) {
    if (config.law == "bpr") return TravelTimeLaw::bpr();
    if (config.law == "pwl") return TravelTimeLaw::two_line(net, config.theta);
    throw std::invalid_argument("scenario: unknown law " + config.law);
}

AssignmentMode mode_of(const std::string& name) {
    if (name == "aware_joint") return AssignmentMode::aware_joint;
    if (name == "unaware_greedy") return AssignmentMode::unaware_greedy;
    throw std::invalid_argument("scenario: unknown assignment mode " + name);
}

std::string point_tag(double phi, double psi, const std::string& mode) {
    std::ostringstream out;
    out << format_double(phi) << "_" << format_double(psi) << "_" << mode;
    return out.str();
}

double sp_time(const Network& net, const std::vector<double>& t,
               std::map<int, ShortestPathTree>& cache, int from, int to) {
    if (from == to) return 0.0;
    auto it = cache.find(from);
    if (it == cache.end()) it = cache.emplace(from, shortest_paths(net, t, from)).first;
    return it->second.dist[to - 1];
}

// per-arc congestion difference between two links files (column 8 is sigma)
std::string sigma_diff_csv(const std::string& links_a, const std::string& links_b) {
    auto sigma_column = [](const std::string& csv) {
        std::vector<std::string> out;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            int col = 0;
            std::string field;
            std::istringstream row(line);
            std::string value;
            while (std::getline(row, field, ',')) {
                if (col == 8) value = field;
                ++col;
            }
            out.push_back(value);
        }
        return out;
    };
    const auto sa = sigma_column(links_a);
    const auto sb = sigma_column(links_b);
    std::ostringstream out;
    out << "arc,sigma_unaware,sigma_aware,difference\n";
    for (std::size_t a = 0; a < std::min(sa.size(), sb.size()); ++a)
        out << a << "," << sa[a] << "," << sb[a] << ","
            << format_double(std::stod(sa[a]) - std::stod(sb[a])) << "\n";
    return out.str();
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

ScenarioConfig parse_scenario_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    ScenarioConfig c;
    c.network_path = j.at("network").get<std::string>();
    if (j.contains("trips")) c.trips_path = j.at("trips").get<std::string>();
    if (j.contains("requests")) c.requests_json_path = j.at("requests").get<std::string>();
    if (j.contains("net_time_unit")) c.net_time_unit = j.at("net_time_unit").get<std::string>();
    if (j.contains("dbar_minutes")) c.dbar_minutes = j.at("dbar_minutes").get<double>();
    if (j.contains("tbar_minutes")) c.tbar_minutes = j.at("tbar_minutes").get<double>();
    if (j.contains("rho")) c.rho = j.at("rho").get<double>();
    if (j.contains("phi")) c.phi_list = j.at("phi").get<std::vector<double>>();
    if (j.contains("psi")) c.psi_list = j.at("psi").get<std::vector<double>>();
    if (j.contains("modes")) c.modes = j.at("modes").get<std::vector<std::string>>();
    if (j.contains("demand_scale")) c.demand_scale = j.at("demand_scale").get<double>();
    if (j.contains("law")) c.law = j.at("law").get<std::string>();
    if (j.contains("theta")) c.theta = j.at("theta").get<double>();
    if (j.contains("pair_rate_floor")) c.pair_rate_floor = j.at("pair_rate_floor").get<double>();
    if (j.contains("tol_obj")) c.tol_obj = j.at("tol_obj").get<double>();
    if (j.contains("max_rounds")) c.max_rounds = j.at("max_rounds").get<int>();
    if (j.contains("solver_tol")) c.solver_tol = j.at("solver_tol").get<double>();
    if (j.contains("solver_max_iter")) c.solver_max_iter = j.at("solver_max_iter").get<int>();
    if (j.contains("ue_gap_tol")) c.ue_gap_tol = j.at("ue_gap_tol").get<double>();
    if (j.contains("ue_max_iter")) c.ue_max_iter = j.at("ue_max_iter").get<int>();
    if (j.contains("fp_tol")) c.fp_tol = j.at("fp_tol").get<double>();
    if (j.contains("fp_max_iter")) c.fp_max_iter = j.at("fp_max_iter").get<int>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    validate(c);
    return c;
}

void validate(const ScenarioConfig& config) {
    if (config.network_path.empty()) throw std::invalid_argument("scenario: network path missing");
    if (config.dbar_minutes < 0.0) throw std::invalid_argument("scenario: dbar must be >= 0");
    if (!(config.tbar_minutes > 0.0)) throw std::invalid_argument("scenario: tbar must be > 0");
    if (config.phi_list.empty() || config.psi_list.empty() || config.modes.empty())
        throw std::invalid_argument("scenario: phi/psi/mode lists must be nonempty");
    for (double v : config.phi_list)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("scenario: phi outside [0,1]");
    for (double v : config.psi_list)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("scenario: psi outside [0,1]");
    for (const std::string& m : config.modes) mode_of(m);
    if (!(config.demand_scale > 0.0))
        throw std::invalid_argument("scenario: demand scale must be positive");
    if (config.rho < 0.0 || config.rho > 1.0)
        throw std::invalid_argument("scenario: rho outside [0,1]");
}

ScenarioInputs load_scenario_inputs(const ScenarioConfig& config) {
    Network net = [&] {
        const std::string text = read_file(config.network_path);
        if (config.network_path.size() > 5 &&
            config.network_path.substr(config.network_path.size() - 5) == ".json")
            return parse_network_json(text);
        return parse_tntp_net(text);
    }();

    if (config.net_time_unit == "minutes") {
        std::vector<Arc> arcs = net.arcs();
        for (Arc& a : arcs) a.t0 /= 60.0;
        net = Network(net.num_vertices(), std::move(arcs));
    } else if (config.net_time_unit != "hours") {
        throw std::invalid_argument("scenario: net_time_unit must be hours or minutes");
    }

    RequestSet requests;
    if (!config.trips_path.empty())
        requests = parse_tntp_trips(read_file(config.trips_path), net.num_vertices());
    else if (!config.requests_json_path.empty())
        requests = parse_requests_json(read_file(config.requests_json_path));
    else
        throw std::invalid_argument("scenario: no demand input given");
    validate_requests(requests, net.num_vertices());
    if (config.demand_scale != 1.0)
        for (Request& r : requests) r.rate *= config.demand_scale;
    return {std::move(net), std::move(requests)};
}

double avg_time_private_minutes(const Network& net, const std::vector<double>& t,
                                const RequestSet& requests) {
    std::map<int, ShortestPathTree> cache;
    double num = 0.0, den = 0.0;
    for (const Request& r : requests) {
        num += r.rate * sp_time(net, t, cache, r.origin, r.destination);
        den += r.rate;
    }
    return den > 0.0 ? 60.0 * num / den : 0.0;
}

double avg_time_individual_minutes(const Network& net, const std::vector<double>& t,
                                   const RequestSet& requests) {
    return avg_time_private_minutes(net, t, requests);
}

double avg_time_pooled_minutes(const Network& net, const std::vector<double>& t,
                               const ConfigCatalog& catalog, const PoolingOutcome& outcome) {
    std::map<int, ShortestPathTree> cache;
    auto dist = [&](int from, int to) { return sp_time(net, t, cache, from, to); };

    double num = 0.0, den = 0.0;
    for (const PoolAllocationEntry& e : outcome.allocations) {
        if (e.m == e.n) {
            const Request& r = catalog.requests[e.m];
            const double tt = dist(r.origin, r.destination);
            num += 2.0 * e.rate * tt;  // two users per vehicle, no detour
            den += 2.0 * e.rate;
            continue;
        }
        const auto configs =
            enumerate_configs(catalog.requests[e.m], catalog.requests[e.n], e.m, e.n);
        const PoolConfig& cfg = configs[e.c - 1];
        double tm = 0.0, tn = 0.0;
        for (int p = cfg.m_start; p < cfg.m_end; ++p) tm += dist(cfg.seq[p], cfg.seq[p + 1]);
        for (int p = cfg.n_start; p < cfg.n_end; ++p) tn += dist(cfg.seq[p], cfg.seq[p + 1]);
        num += e.rate * (tm + tn);
        den += 2.0 * e.rate;
    }
    for (std::size_t m = 0; m < outcome.leftover.size(); ++m) {
        const double rate = outcome.leftover[m];
        if (rate <= 0.0) continue;
        const Request& r = catalog.requests[m];
        num += rate * dist(r.origin, r.destination);
        den += rate;
    }
    return den > 0.0 ? 60.0 * num / den : 0.0;
}

double freeflow_routing_objective(const Network& net, const Matrix& drp, double rho,
                                  const std::vector<double>& x_p) {
    const std::vector<double> t0 = net.free_flow_times();
    std::map<int, ShortestPathTree> cache;
    Matrix X(net.num_arcs(), net.num_vertices());
    for (const OdDemand& d : demand_list(drp)) {
        auto it = cache.find(d.origin);
        if (it == cache.end())
            it = cache.emplace(d.origin, shortest_paths(net, t0, d.origin)).first;
        int at = d.dest;
        while (at != d.origin) {
            const int a = it->second.pred_arc[at - 1];
            X(a, d.origin - 1) += d.rate;
            at = net.arc(a).tail;
        }
    }
    const std::vector<double> x_r = rebalancing_feasibility_check(net, X);
    std::vector<double> total = X.row_sums();
    for (int a = 0; a < net.num_arcs(); ++a) total[a] += x_r[a] + x_p[a];
    const std::vector<double> t = travel_times_at(net, total, TravelTimeLaw::bpr());
    return objective(t, X, x_r, rho);
}

GridPointOutput run_grid_point(const Network& net, const RequestSet& all_requests,
                               const ScenarioConfig& config, double phi, double psi,
                               const std::string& mode) {
    const auto started = std::chrono::steady_clock::now();
    GridPointOutput out;
    out.row.phi = phi;
    out.row.psi = psi;
    out.row.mode = mode;
    out.links_name = "links_" + point_tag(phi, psi, mode) + ".csv";
    out.trace_name = "trace_" + point_tag(phi, psi, mode) + ".json";

    const DemandSplit split = split_by_penetration(all_requests, phi, psi);
    const ConfigCatalog catalog = precompute_catalog(net, split.amod_poolable,
                                                     config.dbar_minutes / 60.0,
                                                     config.pair_rate_floor);

    BilevelOptions opt;
    opt.mode = mode_of(mode);
    opt.rho = config.rho;
    opt.operator_law = operator_law(config, net);
    opt.ue.gap_tol = config.ue_gap_tol;
    opt.ue.max_iter = config.ue_max_iter;
    opt.tol_obj = config.tol_obj;
    opt.max_rounds = config.max_rounds;
    opt.tbar = config.tbar_minutes / 60.0;
    opt.solver.tol = config.solver_tol;
    opt.solver.max_iter = config.solver_max_iter;
    opt.fp_tol = config.fp_tol;
    opt.fp_max_iter = config.fp_max_iter;

    const BilevelResult res =
        bilevel_solve(net, split.private_requests, split.amod_individual, catalog, opt);

    // realized times: every class is compared on the physical BPR law
    const FlowSolution& sol = res.operator_solution;
    std::vector<double> total = sol.X.row_sums();
    for (int a = 0; a < net.num_arcs(); ++a) total[a] += sol.x_r[a] + sol.x_p[a];
    const std::vector<double> t_real = travel_times_at(net, total, TravelTimeLaw::bpr());

    if (!split.private_requests.empty())
        out.row.avg_private_min = avg_time_private_minutes(net, t_real, split.private_requests);
    if (!split.amod_individual.empty())
        out.row.avg_individual_min =
            avg_time_individual_minutes(net, t_real, split.amod_individual);
    if (!split.amod_poolable.empty())
        out.row.avg_pooled_min = avg_time_pooled_minutes(net, t_real, catalog, res.pooling);

    out.row.objective = sol.objective;
    out.row.rounds = res.rounds;
    out.row.converged = res.converged;
    double sigma_sum = 0.0;
    for (int a = 0; a < net.num_arcs(); ++a) {
        const double s = link_congestion(total[a], net.arc(a).capacity);
        out.row.sigma_max = std::max(out.row.sigma_max, s);
        sigma_sum += s;
        if (s > 0.0) ++out.row.links_congested;
    }
    out.row.sigma_mean = sigma_sum / net.num_arcs();
    out.row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    // per-link file
    std::ostringstream links;
    links << "arc,tail,head,flow_amod,flow_reb,flow_private,flow_total,capacity,sigma,time_h\n";
    const std::vector<double> u = sol.X.row_sums();
    for (int a = 0; a < net.num_arcs(); ++a) {
        const Arc& arc = net.arc(a);
        links << a << "," << arc.tail << "," << arc.head << "," << format_double(u[a]) << ","
              << format_double(sol.x_r[a]) << "," << format_double(sol.x_p[a]) << ","
              << format_double(total[a]) << "," << format_double(arc.capacity) << ","
              << format_double(link_congestion(total[a], arc.capacity)) << ","
              << format_double(t_real[a]) << "\n";
    }
    out.links_csv = links.str();

    nlohmann::json trace;
    trace["phi"] = phi;
    trace["psi"] = psi;
    trace["mode"] = mode;
    trace["objective_trace"] = res.objective_trace;
    trace["rounds"] = res.rounds;
    trace["converged"] = res.converged;
    trace["solver"] = {{"iterations", sol.diag.iterations},
                       {"fw_gap", sol.diag.fw_gap},
                       {"conservation_residual", sol.diag.conservation_residual},
                       {"rebalance_residual", sol.diag.rebalance_residual},
                       {"demand_residual", sol.diag.demand_residual}};
    trace["ue"] = {{"iterations", res.private_report.iterations},
                   {"relative_gap", res.private_report.relative_gap},
                   {"converged", res.private_report.converged}};
    trace["gamma_entries"] = static_cast<int>(res.pooling.allocations.size())
                             ;
    trace["wall_seconds"] = out.row.wall_seconds;
    trace["waiting_time_excluded"] = true;  // experienced times exclude waiting
    out.trace_json = trace.dump(2);
    return out;
}

std::string metrics_csv_header() {
    return "phi,psi,mode,avg_private_min,avg_individual_min,avg_pooled_min,objective_vehh,"
           "sigma_max,sigma_mean,links_congested,rounds,converged,status\n";
}

std::string metrics_csv_line(const MetricsRow& row) {
    std::ostringstream out;
    auto opt = [](const std::optional<double>& v) {
        return v.has_value() ? format_double(*v) : std::string();
    };
    out << format_double(row.phi) << "," << format_double(row.psi) << "," << row.mode << ","
        << opt(row.avg_private_min) << "," << opt(row.avg_individual_min) << ","
        << opt(row.avg_pooled_min) << "," << format_double(row.objective) << ","
        << format_double(row.sigma_max) << "," << format_double(row.sigma_mean) << ","
        << row.links_congested << "," << row.rounds << "," << (row.converged ? 1 : 0) << ","
        << row.status << "\n";
    return out.str();
}

bool run_scenario(const ScenarioConfig& config, const std::string& out_dir_override, int jobs) {
    const ScenarioInputs inputs = load_scenario_inputs(config);
    const std::string out_dir = out_dir_override.empty() ? config.out_dir : out_dir_override;
    std::filesystem::create_directories(out_dir);

    struct Point {
        double phi, psi;
        std::string mode;
    };
    std::vector<Point> grid;
    for (double phi : config.phi_list)
        for (double psi : config.psi_list)
            for (const std::string& mode : config.modes) grid.push_back({phi, psi, mode});

    auto run_one = [&](const Point& p) -> GridPointOutput {
        try {
            return run_grid_point(inputs.network, inputs.requests, config, p.phi, p.psi, p.mode);
        } catch (const std::exception& e) {
            GridPointOutput bad;
            bad.row.phi = p.phi;
            bad.row.psi = p.psi;
            bad.row.mode = p.mode;
            bad.row.status = std::string("error: ") + e.what();
            return bad;
        }
    };

    std::vector<GridPointOutput> results(grid.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) results[i] = run_one(grid[i]);
    } else {
        for (std::size_t base = 0; base < grid.size(); base += jobs) {
            std::vector<std::future<GridPointOutput>> batch;
            const std::size_t end = std::min(grid.size(), base + jobs);
            for (std::size_t i = base; i < end; ++i)
                batch.push_back(std::async(std::launch::async, run_one, grid[i]));
            for (std::size_t i = base; i < end; ++i) results[i] = batch[i - base].get();
        }
    }

    std::ostringstream metrics;
    metrics << metrics_csv_header();
    bool ok = true;
    for (const GridPointOutput& r : results) {
        metrics << metrics_csv_line(r.row);
        if (r.row.status != "ok") {
            ok = false;
            continue;
        }
        write_file(out_dir + "/" + r.links_name, r.links_csv);
        write_file(out_dir + "/" + r.trace_name, r.trace_json);
    }
    write_file(out_dir + "/metrics.csv", metrics.str());
    return ok;
}

bool compare_assignment(const ScenarioConfig& config, const std::string& out_dir_override) {
    ScenarioConfig both = config;
    both.modes = {"unaware_greedy", "aware_joint"};
    const ScenarioInputs inputs = load_scenario_inputs(both);
    const std::string out_dir = out_dir_override.empty() ? both.out_dir : out_dir_override;
    std::filesystem::create_directories(out_dir);

    bool ok = true;
    nlohmann::json summary = nlohmann::json::array();
    std::ostringstream metrics;
    metrics << metrics_csv_header();
    for (double phi : both.phi_list) {
        for (double psi : both.psi_list) {
            GridPointOutput unaware, aware;
            try {
                unaware = run_grid_point(inputs.network, inputs.requests, both, phi, psi,
                                         "unaware_greedy");
                aware = run_grid_point(inputs.network, inputs.requests, both, phi, psi,
                                       "aware_joint");
            } catch (const std::exception& e) {
                ok = false;
                summary.push_back({{"phi", phi}, {"psi", psi}, {"error", e.what()}});
                continue;
            }
            metrics << metrics_csv_line(unaware.row) << metrics_csv_line(aware.row);
            if (unaware.row.status != "ok" || aware.row.status != "ok") {
                ok = false;
                continue;
            }
            write_file(out_dir + "/" + unaware.links_name, unaware.links_csv);
            write_file(out_dir + "/" + aware.links_name, aware.links_csv);
            write_file(out_dir + "/" + unaware.trace_name, unaware.trace_json);
            write_file(out_dir + "/" + aware.trace_name, aware.trace_json);
            write_file(out_dir + "/links_diff_" + format_double(phi) + "_" +
                           format_double(psi) + ".csv",
                       sigma_diff_csv(unaware.links_csv, aware.links_csv));

            const double ja = aware.row.objective, ju = unaware.row.objective;
            summary.push_back({{"phi", phi},
                               {"psi", psi},
                               {"objective_aware", ja},
                               {"objective_unaware", ju},
                               {"relative_difference", std::abs(ja - ju) / std::max(ja, 1e-12)},
                               {"sigma_max_aware", aware.row.sigma_max},
                               {"sigma_max_unaware", unaware.row.sigma_max}});
        }
    }
    write_file(out_dir + "/metrics.csv", metrics.str());
    write_file(out_dir + "/compare_summary.json", summary.dump(2));
    return ok;
}

}  // namespace amod
