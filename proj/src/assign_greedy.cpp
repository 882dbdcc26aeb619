#include "amod/assign_greedy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "amod/demand.hpp"

namespace amod {

namespace {

double prob_or_zero(double a, double b, double tbar) {
    if (!(a > 0.0) || !(b > 0.0)) return 0.0;
    return pool_probability(a, b, tbar);
}

std::map<int, ShortestPathTree> trees_for_catalog(const Network& net,
                                                  const ConfigCatalog& catalog,
                                                  const std::vector<double>& t_eval) {
    std::map<int, ShortestPathTree> trees;
    for (const Request& r : catalog.requests) {
        if (!trees.count(r.origin)) trees.emplace(r.origin, shortest_paths(net, t_eval, r.origin));
        if (!trees.count(r.destination))
            trees.emplace(r.destination, shortest_paths(net, t_eval, r.destination));
    }
    return trees;
}

}  // namespace

PairScores score_all_pairs(const Network& net, const ConfigCatalog& catalog,
                           const std::vector<double>& t_eval) {
    const int M = static_cast<int>(catalog.requests.size());
    auto trees = trees_for_catalog(net, catalog, t_eval);
    auto dist = [&](int from, int to) {
        if (from == to) return 0.0;
        return trees.at(from).dist[to - 1];
    };

    PairScores scores;
    scores.delta = Matrix(M, M);
    scores.best_config.assign(M, std::vector<int>(M, 0));
    scores.direct_cost.assign(M, 0.0);
    for (int m = 0; m < M; ++m) {
        const Request& r = catalog.requests[m];
        scores.direct_cost[m] = dist(r.origin, r.destination);
        if (std::isinf(scores.direct_cost[m]))
            throw std::runtime_error("score_all_pairs: disconnected request OD");
        // pooling a request with itself halves its vehicle legs
        scores.delta(m, m) = scores.direct_cost[m];
        scores.best_config[m][m] = 1;
    }
    for (const PairCatalog& p : catalog.pairs) {
        double best = kInf;
        int best_c = 0;
        for (const ConfigOption& o : p.options) {
            double cost = 0.0;
            for (const PoolLeg& leg : o.legs) cost += dist(leg.from, leg.to);
            if (cost < best) {
                best = cost;
                best_c = o.c;
            }
        }
        const double d = scores.direct_cost[p.m] + scores.direct_cost[p.n] - best;
        scores.delta(p.m, p.n) = d;
        scores.delta(p.n, p.m) = d;
        scores.best_config[p.m][p.n] = best_c;
        scores.best_config[p.n][p.m] = best_c;
    }
    return scores;
}

double pair_improvement(const ConfigCatalog& catalog, const Network& net,
                        const std::vector<double>& t_eval, int m, int n) {
    if (m != n && !catalog.find_pair(m, n))
        throw std::invalid_argument("pair_improvement: pair has no feasible configuration");
    const PairScores scores = score_all_pairs(net, catalog, t_eval);
    return scores.delta(m, n);
}

GreedyAssignment greedy_core(const std::vector<double>& rates, const Matrix& delta,
                             const std::vector<std::vector<int>>& best_config, double tbar) {
    const int M = static_cast<int>(rates.size());
    GreedyAssignment out;
    out.beta = Matrix(M, M);
    out.gamma = Matrix(M, M);
    out.best_config = best_config;
    out.residual = rates;
    Matrix working = delta;

    for (;;) {
        int pm = -1, pn = -1;
        double best = 0.0;
        for (int m = 0; m < M; ++m)
            for (int n = m; n < M; ++n)
                if (working(m, n) > best) {
                    best = working(m, n);
                    pm = m;
                    pn = n;
                }
        if (pm < 0) break;  // max improvement <= 0

        // The same-OD branch is the self-pooling rule. Distinct requests that
        // happen to share an OD still need demand from both sides, so they go
        // through the general min() branch.
        const bool self_pool = pm == pn;
        double gamma_value = 0.0;
        if (self_pool) {
            out.beta(pm, pn) = out.residual[pm];
            out.beta(pn, pm) = out.beta(pm, pn);
            const double p = prob_or_zero(out.beta(pm, pn), out.beta(pn, pm), tbar);
            gamma_value = out.beta(pm, pn) * p / 2.0;
        } else {
            out.beta(pn, pm) = out.residual[pn];
            out.beta(pm, pn) = out.residual[pm];
            const double p = prob_or_zero(out.beta(pm, pn), out.beta(pn, pm), tbar);
            gamma_value = std::min(out.beta(pn, pm), out.beta(pm, pn)) * p;
        }
        out.gamma(pm, pn) = gamma_value;
        out.gamma(pn, pm) = gamma_value;
        out.residual[pm] = std::max(0.0, out.residual[pm] - gamma_value);
        out.residual[pn] = std::max(0.0, out.residual[pn] - gamma_value);
        out.total_improvement += gamma_value * delta(pm, pn);
        working(pm, pn) = 0.0;
        working(pn, pm) = 0.0;
        ++out.iterations;
    }
    return out;
}

GreedyAssignment greedy_assign(const Network& net, const ConfigCatalog& catalog,
                               const std::vector<double>& t_eval, double tbar) {
    const PairScores scores = score_all_pairs(net, catalog, t_eval);
    std::vector<double> rates;
    for (const Request& r : catalog.requests) rates.push_back(r.rate);
    return greedy_core(rates, scores.delta, scores.best_config, tbar);
}

Matrix assemble_drp_with_leftovers(const Matrix& demand, const GreedyAssignment& assignment,
                                   const ConfigCatalog& catalog) {
    const int M = static_cast<int>(catalog.requests.size());
    const int nv = demand.rows();
    Matrix drp(nv, nv);
    auto add_legs = [&](const std::vector<PoolLeg>& legs, double rate) {
        for (const PoolLeg& leg : legs) drp(leg.to - 1, leg.from - 1) += rate;
    };

    for (int m = 0; m < M; ++m) {
        for (int n = m + 1; n < M; ++n) {
            const double g = assignment.gamma(m, n);
            if (g <= 0.0) continue;
            const PairCatalog* pc = catalog.find_pair(m, n);
            if (!pc)
                throw std::invalid_argument("assemble_drp: gamma on a pair not in the catalog");
            const int c = assignment.best_config[m][n];
            const ConfigOption* opt = nullptr;
            for (const ConfigOption& o : pc->options)
                if (o.c == c) opt = &o;
            if (!opt) throw std::invalid_argument("assemble_drp: chosen config not in catalog");
            add_legs(opt->legs, g);
        }
        if (assignment.gamma(m, m) > 0.0) add_legs(catalog.self_legs[m], assignment.gamma(m, m));
    }

    for (int m = 0; m < M; ++m) {
        const Request& r = catalog.requests[m];
        double covered = 2.0 * assignment.gamma(m, m);
        for (int n = 0; n < M; ++n)
            if (n != m) covered += assignment.gamma(m, n);
        const double leftover = r.rate - covered;
        if (leftover < -1e-9 * std::max(1.0, r.rate))
            throw std::invalid_argument("assemble_drp: pooled demand exceeds request rate");
        if (leftover > 0.0) drp(r.destination - 1, r.origin - 1) += leftover;
    }

    for (int j = 0; j < nv; ++j) {
        double col = 0.0;
        for (int i = 0; i < nv; ++i)
            if (i != j) col += drp(i, j);
        drp(j, j) = -col;
    }
    return drp;
}

FixedPointResult fixed_point_assignment(const Network& net, const ConfigCatalog& catalog,
                                        const std::vector<double>& x_p,
                                        const Matrix* fixed_demand,
                                        const FixedPointOptions& options) {
    if (options.max_iter < 1)
        throw std::invalid_argument("fixed_point_assignment: max_iter must be at least 1");
    // tolerant of duplicated ODs in the poolable set
    Matrix demand(net.num_vertices(), net.num_vertices());
    for (const Request& r : catalog.requests) {
        demand(r.destination - 1, r.origin - 1) += r.rate;
        demand(r.origin - 1, r.origin - 1) -= r.rate;
    }

    FixedPointResult out;
    std::vector<double> t_eval = net.free_flow_times();
    double prev = kInf;
    for (int k = 1; k <= options.max_iter; ++k) {
        out.iterations = k;
        out.assignment = greedy_assign(net, catalog, t_eval, options.tbar);
        out.drp = assemble_drp_with_leftovers(demand, out.assignment, catalog);
        Matrix routed = out.drp;
        if (fixed_demand) routed.axpy(1.0, *fixed_demand);
        out.solution = solve_routing(net, routed, options.law, options.rho, x_p, options.solver);
        out.objective_trace.push_back(out.solution.objective);
        const double rel = k == 1 ? kInf
                                  : std::abs(out.solution.objective - prev) /
                                        std::max(std::abs(prev), 1e-12);
        prev = out.solution.objective;
        if (rel <= options.tol) {
            out.converged = true;
            break;
        }
        t_eval = out.solution.t;
    }
    return out;
}

PoolingOutcome outcome_from_greedy(const GreedyAssignment& assignment,
                                   const ConfigCatalog& catalog) {
    const int M = static_cast<int>(catalog.requests.size());
    PoolingOutcome out;
    out.leftover.assign(M, 0.0);
    for (int m = 0; m < M; ++m) {
        for (int n = m + 1; n < M; ++n)
            if (assignment.gamma(m, n) > 0.0)
                out.allocations.push_back(
                    {m, n, assignment.best_config[m][n], assignment.gamma(m, n)});
        if (assignment.gamma(m, m) > 0.0)
            out.allocations.push_back({m, m, 1, assignment.gamma(m, m)});
        double covered = 2.0 * assignment.gamma(m, m);
        for (int n = 0; n < M; ++n)
            if (n != m) covered += assignment.gamma(m, n);
        out.leftover[m] = std::max(0.0, catalog.requests[m].rate - covered);
    }
    return out;
}

PoolingOutcome outcome_from_gamma(const std::map<GammaKey, double>& gamma,
                                  const ConfigCatalog& catalog) {
    const int M = static_cast<int>(catalog.requests.size());
    PoolingOutcome out;
    out.leftover.assign(M, 0.0);
    std::vector<double> covered(M, 0.0);
    for (const auto& [key, value] : gamma) {
        const auto [m, n, c] = key;
        out.allocations.push_back({m, n, c, value});
        if (m == n) covered[m] += 2.0 * value;
        else {
            covered[m] += value;
            covered[n] += value;
        }
    }
    for (int m = 0; m < M; ++m)
        out.leftover[m] = std::max(0.0, catalog.requests[m].rate - covered[m]);
    return out;
}

}  // namespace amod
