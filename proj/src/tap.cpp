#include "amod/tap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace amod {

namespace {

// AON loading plus the shortest-path lower bound; optionally per-request flows.
struct AonResult {
    std::vector<double> flow;
    double lower_bound = 0.0;
    std::vector<double> od_time;
    std::vector<std::vector<double>> od_flows;
};

AonResult aon_detail(const Network& net, const std::vector<double>& t,
                     const RequestSet& requests, bool track) {
    AonResult out;
    out.flow.assign(net.num_arcs(), 0.0);
    out.od_time.assign(requests.size(), 0.0);
    if (track) out.od_flows.assign(requests.size(), std::vector<double>(net.num_arcs(), 0.0));

    std::map<int, ShortestPathTree> trees;
    for (const Request& r : requests)
        if (!trees.count(r.origin)) trees.emplace(r.origin, shortest_paths(net, t, r.origin));

    for (std::size_t i = 0; i < requests.size(); ++i) {
        const Request& r = requests[i];
        const ShortestPathTree& tree = trees.at(r.origin);
        if (std::isinf(tree.dist[r.destination - 1]))
            throw std::runtime_error("all_or_nothing: OD " + std::to_string(r.origin) + "->" +
                                     std::to_string(r.destination) + " disconnected");
        out.od_time[i] = tree.dist[r.destination - 1];
        out.lower_bound += r.rate * out.od_time[i];
        int at = r.destination;
        while (at != r.origin) {
            const int a = tree.pred_arc[at - 1];
            out.flow[a] += r.rate;
            if (track) out.od_flows[i][a] += r.rate;
            at = net.arc(a).tail;
        }
    }
    return out;
}

struct PathFlow {
    std::vector<int> arcs;
    double flow = 0.0;
};

// Decompose one OD's arc flow into paths by repeatedly extracting the
// cheapest path inside the remaining support.
std::vector<PathFlow> support_paths(const Network& net, int origin, int dest,
                                    std::vector<double> remaining, const std::vector<double>& t,
                                    double flow_eps) {
    std::vector<PathFlow> out;
    int guard = net.num_arcs() + 8;
    std::vector<double> cost(net.num_arcs());
    while (guard-- > 0) {
        bool any = false;
        for (int a = 0; a < net.num_arcs(); ++a) {
            const bool in = remaining[a] > flow_eps;
            cost[a] = in ? t[a] : 1e18;
            any = any || in;
        }
        if (!any) break;
        ShortestPathTree tree = shortest_paths(net, cost, origin);
        if (tree.dist[dest - 1] >= 1e17) break;
        PathFlow p;
        p.arcs = tree_path(net, tree, origin, dest);
        p.flow = kInf;
        for (int a : p.arcs) p.flow = std::min(p.flow, remaining[a]);
        if (!(p.flow > flow_eps)) break;
        for (int a : p.arcs) remaining[a] -= p.flow;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

std::vector<double> all_or_nothing(const Network& net, const std::vector<double>& t,
                                   const RequestSet& requests) {
    for (double v : t)
        if (!(v > 0.0)) throw std::invalid_argument("all_or_nothing: travel times must be positive");
    validate_requests(requests, net.num_vertices());
    return aon_detail(net, t, requests, false).flow;
}

double beckmann_value(const Network& net, const TravelTimeLaw& law,
                      const std::vector<double>& background, const std::vector<double>& x) {
    double total = 0.0;
    for (int a = 0; a < net.num_arcs(); ++a) {
        const double lo = background[a];
        const double hi = background[a] + x[a];
        if (law.kind == TimeLaw::bpr) {
            const Arc& arc = net.arc(a);
            auto anti = [&](double f) {
                return arc.t0 * (f + arc.bpr_alpha * std::pow(f / arc.capacity, arc.bpr_beta) * f /
                                         (arc.bpr_beta + 1.0));
            };
            total += anti(hi) - anti(lo);
        } else {
            const ArcPwl& p = law.pwl.arcs[a];
            auto seg_int = [&](const PwlSegment& s, double l, double r) {
                return s.intercept * (r - l) + 0.5 * s.slope * (r * r - l * l);
            };
            // the max-affine switches at the fitted breakpoint
            const double bp = p.breakpoint;
            if (hi <= bp) total += seg_int(p.seg[0], lo, hi);
            else if (lo >= bp) total += seg_int(p.seg[1], lo, hi);
            else total += seg_int(p.seg[0], lo, bp) + seg_int(p.seg[1], bp, hi);
        }
    }
    return total;
}

EquilibriumReport solve_ue(const Network& net, const RequestSet& requests,
                           const std::vector<double>& background, const UeOptions& options) {
    if (!(options.gap_tol > 0.0)) throw std::invalid_argument("solve_ue: gap_tol must be positive");
    if (static_cast<int>(background.size()) != net.num_arcs())
        throw std::invalid_argument("solve_ue: background length mismatch");
    validate_requests(requests, net.num_vertices());

    EquilibriumReport rep;
    rep.x_p.assign(net.num_arcs(), 0.0);
    if (requests.empty()) {
        rep.converged = true;
        rep.relative_gap = 0.0;
        rep.final_times = travel_times_at(net, background, options.law);
        return rep;
    }

    std::vector<double> total(net.num_arcs());
    auto times_of = [&](const std::vector<double>& x) {
        for (int a = 0; a < net.num_arcs(); ++a) total[a] = background[a] + x[a];
        return travel_times_at(net, total, options.law);
    };

    const int na = net.num_arcs();
    std::vector<double> t = times_of(rep.x_p);
    AonResult first = aon_detail(net, t, requests, options.track_od_flows);
    rep.x_p = first.flow;
    if (options.track_od_flows) rep.od_flows = first.od_flows;

    // conjugate Frank-Wolfe: blend the all-or-nothing target with the previous
    // target so consecutive directions are Hessian-conjugate
    std::vector<double> target(na, 0.0);
    std::vector<std::vector<double>> target_od;
    bool have_target = false;

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        rep.iterations = iter;
        t = times_of(rep.x_p);
        rep.beckmann_trace.push_back(beckmann_value(net, options.law, background, rep.x_p));

        AonResult aon = aon_detail(net, t, requests, options.track_od_flows);
        double tx = 0.0;
        for (int a = 0; a < na; ++a) tx += t[a] * rep.x_p[a];
        rep.relative_gap = tx > 0.0 ? (tx - aon.lower_bound) / tx : 0.0;
        if (rep.relative_gap <= options.gap_tol) {
            rep.converged = true;
            break;
        }

        double beta = 0.0;
        if (have_target) {
            double hd2 = 0.0, hdy = 0.0;
            for (int a = 0; a < na; ++a) {
                const double h =
                    options.law.arc_time_slope(net, a, background[a] + rep.x_p[a]);
                const double d_prev = target[a] - rep.x_p[a];
                hd2 += h * d_prev * d_prev;
                hdy += h * d_prev * (aon.flow[a] - rep.x_p[a]);
            }
            const double denom = hdy - hd2;
            if (std::abs(denom) > 1e-30) beta = std::clamp(hdy / denom, 0.0, 0.99);
        }
        if (!have_target) {
            target = aon.flow;
            if (options.track_od_flows) target_od = aon.od_flows;
            have_target = true;
        } else {
            for (int a = 0; a < na; ++a)
                target[a] = beta * target[a] + (1.0 - beta) * aon.flow[a];
            if (options.track_od_flows)
                for (std::size_t i = 0; i < requests.size(); ++i)
                    for (int a = 0; a < na; ++a)
                        target_od[i][a] =
                            beta * target_od[i][a] + (1.0 - beta) * aon.od_flows[i][a];
        }
        double descent = 0.0;
        for (int a = 0; a < na; ++a) descent += t[a] * (target[a] - rep.x_p[a]);
        if (descent >= 0.0) {
            // conjugate target lost descent: restart from the plain target
            target = aon.flow;
            if (options.track_od_flows) target_od = aon.od_flows;
        }

        // exact line search on the Beckmann derivative
        auto dphi = [&](double l) {
            double s = 0.0;
            for (int a = 0; a < na; ++a) {
                const double d = target[a] - rep.x_p[a];
                if (d == 0.0) continue;
                const double f = background[a] + rep.x_p[a] + l * d;
                s += options.law.arc_time(net, a, f) * d;
            }
            return s;
        };
        double lambda = 1.0;
        if (dphi(0.0) >= 0.0) lambda = 0.0;
        else if (dphi(1.0) > 0.0) {
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                (dphi(mid) <= 0.0 ? lo : hi) = mid;
            }
            lambda = 0.5 * (lo + hi);
        }
        for (int a = 0; a < na; ++a) rep.x_p[a] += lambda * (target[a] - rep.x_p[a]);
        if (options.track_od_flows)
            for (std::size_t i = 0; i < requests.size(); ++i)
                for (int a = 0; a < na; ++a)
                    rep.od_flows[i][a] += lambda * (target_od[i][a] - rep.od_flows[i][a]);
    }

    if (options.track_od_flows && options.refine_paths) {
        // pairwise path swaps per OD: the aggregate link flows are already at
        // equilibrium within gap_tol; this sharpens the per-OD path flows so
        // every used path sits at its OD minimum. Each swap does an exact
        // line search, so the Beckmann potential keeps decreasing.
        std::vector<double> total(na);
        for (int a = 0; a < na; ++a) total[a] = background[a] + rep.x_p[a];
        std::vector<double> tt = travel_times_at(net, total, options.law);
        std::vector<int> delta_p(na), delta_q(na);
        const double eps_flow = 0.5e-6;

        for (int sweep = 0; sweep < options.refine_sweeps; ++sweep) {
            bool moved = false;
            for (std::size_t i = 0; i < requests.size(); ++i) {
                const Request& r = requests[i];
                ShortestPathTree tree = shortest_paths(net, tt, r.origin);
                const double min_cost = tree.dist[r.destination - 1];
                const std::vector<int> best =
                    tree_path(net, tree, r.origin, r.destination);
                const double target_cost =
                    min_cost * (1.0 + 0.5 * options.refine_factor * options.gap_tol);
                for (PathFlow& p : support_paths(net, r.origin, r.destination, rep.od_flows[i],
                                                 tt, eps_flow)) {
                    double cost_p = 0.0;
                    for (int a : p.arcs) cost_p += tt[a];
                    if (cost_p <= target_cost) continue;
                    std::fill(delta_p.begin(), delta_p.end(), 0);
                    std::fill(delta_q.begin(), delta_q.end(), 0);
                    for (int a : p.arcs) delta_p[a] = 1;
                    for (int a : best) delta_q[a] = 1;
                    std::vector<int> p_only, q_only;
                    for (int a = 0; a < na; ++a) {
                        if (delta_p[a] && !delta_q[a]) p_only.push_back(a);
                        if (delta_q[a] && !delta_p[a]) q_only.push_back(a);
                    }
                    if (p_only.empty()) continue;
                    auto dphi = [&](double s) {
                        double v = 0.0;
                        for (int a : q_only) v += options.law.arc_time(net, a, total[a] + s);
                        for (int a : p_only)
                            v -= options.law.arc_time(net, a, std::max(0.0, total[a] - s));
                        return v;
                    };
                    double shift = p.flow;
                    if (dphi(0.0) >= 0.0) continue;
                    if (dphi(p.flow) > 0.0) {
                        double lo = 0.0, hi = p.flow;
                        for (int it = 0; it < 60; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            (dphi(mid) <= 0.0 ? lo : hi) = mid;
                        }
                        shift = 0.5 * (lo + hi);
                    }
                    if (!(shift > 0.0)) continue;
                    for (int a : p_only) {
                        rep.od_flows[i][a] = std::max(0.0, rep.od_flows[i][a] - shift);
                        rep.x_p[a] = std::max(0.0, rep.x_p[a] - shift);
                        total[a] = std::max(0.0, total[a] - shift);
                        tt[a] = options.law.arc_time(net, a, total[a]);
                    }
                    for (int a : q_only) {
                        rep.od_flows[i][a] += shift;
                        rep.x_p[a] += shift;
                        total[a] += shift;
                        tt[a] = options.law.arc_time(net, a, total[a]);
                    }
                    moved = true;
                }
            }
            if (!moved) break;
        }
        // refresh the reported gap after the swaps
        t = times_of(rep.x_p);
        AonResult aon = aon_detail(net, t, requests, false);
        double tx = 0.0;
        for (int a = 0; a < na; ++a) tx += t[a] * rep.x_p[a];
        rep.relative_gap = tx > 0.0 ? (tx - aon.lower_bound) / tx : 0.0;
        rep.converged = rep.converged && rep.relative_gap <= options.gap_tol;
    }

    t = times_of(rep.x_p);
    rep.final_times = t;
    AonResult fin = aon_detail(net, t, requests, false);
    rep.min_od_time = fin.od_time;
    return rep;
}

bool wardrop_used_paths_ok(const Network& net, const Request& request,
                           const std::vector<double>& od_flow, const std::vector<double>& t,
                           double cost_tolerance, double flow_eps) {
    const ShortestPathTree ref = shortest_paths(net, t, request.origin);
    const double min_time = ref.dist[request.destination - 1];
    for (const PathFlow& p :
         support_paths(net, request.origin, request.destination, od_flow, t, flow_eps)) {
        double path_cost = 0.0;
        for (int a : p.arcs) path_cost += t[a];
        if (path_cost > min_time + cost_tolerance) return false;
    }
    return true;
}

BilevelResult bilevel_solve(const Network& net, const RequestSet& private_requests,
                            const RequestSet& amod_individual, const ConfigCatalog& catalog,
                            const BilevelOptions& options) {
    if (options.max_rounds < 1)
        throw std::invalid_argument("bilevel_solve: max_rounds must be at least 1");
    const int na = net.num_arcs();
    const bool has_private = !private_requests.empty();
    const bool has_amod = !catalog.requests.empty() || !amod_individual.empty();

    BilevelResult out;
    out.drp = Matrix(net.num_vertices(), net.num_vertices());

    Matrix individual_demand(net.num_vertices(), net.num_vertices());
    if (!amod_individual.empty())
        individual_demand = build_demand_matrix(amod_individual, net.num_vertices());

    // private flows initialized at free flow
    std::vector<double> x_p(na, 0.0);
    if (has_private) x_p = all_or_nothing(net, net.free_flow_times(), private_requests);

    if (!has_amod) {
        // pure TAP
        out.private_report = solve_ue(net, private_requests, std::vector<double>(na, 0.0),
                                      options.ue);
        out.operator_solution.X = Matrix(na, net.num_vertices());
        out.operator_solution.x_r.assign(na, 0.0);
        out.operator_solution.x_p = out.private_report.x_p;
        out.operator_solution.t = out.private_report.final_times;
        out.operator_solution.objective = 0.0;
        out.objective_trace.push_back(0.0);
        out.rounds = 1;
        out.converged = out.private_report.converged;
        return out;
    }

    double prev = kInf;
    for (int round = 1; round <= options.max_rounds; ++round) {
        out.rounds = round;
        if (options.mode == AssignmentMode::aware_joint) {
            ConvexProgram prog =
                assemble_joint(net, catalog, options.operator_law, options.rho, x_p,
                               amod_individual.empty() ? nullptr : &individual_demand);
            out.operator_solution = solve(prog, options.solver);
            out.drp = drp_from_gamma(catalog, out.operator_solution.gamma, net.num_vertices());
            out.pooling = outcome_from_gamma(out.operator_solution.gamma, catalog);
        } else {
            FixedPointOptions fp;
            fp.law = options.operator_law;
            fp.rho = options.rho;
            fp.tbar = options.tbar;
            fp.tol = options.fp_tol;
            fp.max_iter = options.fp_max_iter;
            fp.solver = options.solver;
            FixedPointResult res = fixed_point_assignment(
                net, catalog, x_p, amod_individual.empty() ? nullptr : &individual_demand, fp);
            out.operator_solution = res.solution;
            out.drp = res.drp;
            out.pooling = outcome_from_greedy(res.assignment, catalog);
        }
        out.objective_trace.push_back(out.operator_solution.objective);

        const double rel = std::abs(out.operator_solution.objective - prev) /
                           std::max(std::abs(prev), 1e-12);
        prev = out.operator_solution.objective;
        if (round > 1 && rel <= options.tol_obj) {
            out.converged = true;
            break;
        }
        if (!has_private) {
            // nothing reacts to the operator: one round suffices
            out.converged = true;
            break;
        }
        std::vector<double> amod_flow = out.operator_solution.X.row_sums();
        for (int a = 0; a < na; ++a) amod_flow[a] += out.operator_solution.x_r[a];
        out.private_report = solve_ue(net, private_requests, amod_flow, options.ue);
        x_p = out.private_report.x_p;
    }
    return out;
}

}  // namespace amod
