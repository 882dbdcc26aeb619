#include "amod/joint_qp.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "amod/lp.hpp"

namespace amod {

namespace {

struct GammaColumn {
    int m = 0, n = 0, c = 0;
    const std::vector<PoolLeg>* legs = nullptr;
};

struct Vertex {
    Matrix X;
    std::vector<double> u;  // X*1
    std::vector<double> x_r;
    std::vector<std::pair<int, double>> gamma;  // sparse over gamma columns
};

struct State {
    Matrix X;
    std::vector<double> u;
    std::vector<double> x_r;
    std::vector<double> gamma;  // dense over gamma columns
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

class Engine {
public:
    Engine(const ConvexProgram& prog, const SolveOptions& opt) : prog_(prog), opt_(opt) {
        if (!prog.net) throw std::invalid_argument("solve: program without network");
        net_ = prog.net;
        na_ = net_->num_arcs();
        nv_ = net_->num_vertices();
        if (static_cast<int>(prog.x_p.size()) != na_)
            throw std::invalid_argument("solve: x_p length mismatch");
        for (double v : prog.x_p)
            if (v < 0.0) throw std::invalid_argument("solve: negative private flow");
        if (prog.rho < 0.0 || prog.rho > 1.0)
            throw std::invalid_argument("solve: rho outside [0,1]");
        for (const OdDemand& d : prog.fixed_demand) {
            if (d.origin < 1 || d.origin > nv_ || d.dest < 1 || d.dest > nv_ ||
                d.origin == d.dest || !(d.rate > 0.0))
                throw std::invalid_argument("solve: invalid fixed demand entry");
        }
        build_columns();
        build_lp();
    }

    FlowSolution run() {
        std::vector<double> t(na_), slope(na_), w_x(na_), w_r(na_);
        // start from the oracle priced at private-flow travel times
        const std::vector<double> zeros(na_, 0.0);
        gradient_at(zeros, zeros, t, slope, w_x, w_r);
        set_state(oracle(w_x, w_r));
        std::optional<Vertex> conj_target;
        int zero_steps = 0;

        SolverDiagnostics diag;
        for (int iter = 1; iter <= opt_.max_iter; ++iter) {
            diag.iterations = iter;
            const double j_value = gradient_at(state_.u, state_.x_r, t, slope, w_x, w_r);
            Vertex vertex = oracle(w_x, w_r);
            const double state_score = dot(w_x, state_.u) + dot(w_r, state_.x_r);
            const double gap = state_score - (dot(w_x, vertex.u) + dot(w_r, vertex.x_r));
            diag.fw_gap = gap / std::max(1.0, std::abs(j_value));
            // The FW gap under any fixed subgradient bounds the suboptimality.
            // At PWL kinks the right derivative can be loose, so when steps
            // stall, price the oracle under other subgradient selections:
            // their vertices tighten the certificate and, if a selection
            // still finds a descent direction, the step resumes from it.
            bool stepped_alt = false;
            if (zero_steps > 0 && prog_.law.kind == TimeLaw::pwl) {
                std::vector<double> t2(na_), s2(na_), wx2(na_), wr2(na_);
                for (int sel : {0, -1}) {
                    gradient_at(state_.u, state_.x_r, t2, s2, wx2, wr2, sel);
                    Vertex alt = oracle(wx2, wr2);
                    const double alt_gap = dot(wx2, state_.u) + dot(wr2, state_.x_r) -
                                           (dot(wx2, alt.u) + dot(wr2, alt.x_r));
                    diag.fw_gap =
                        std::min(diag.fw_gap, alt_gap / std::max(1.0, std::abs(j_value)));
                    const double lambda = line_search(alt, +1.0, 1.0);
                    if (lambda > 1e-14) {
                        apply_fw_step(std::move(alt), lambda);
                        conj_target.reset();
                        stepped_alt = true;
                        zero_steps = 0;
                        break;
                    }
                }
                if (!stepped_alt && diag.fw_gap > opt_.tol) {
                    Vertex corrective;
                    const double exact = exact_stationarity_gap(j_value, t, &corrective);
                    if (exact >= 0.0) {
                        diag.fw_gap =
                            std::min(diag.fw_gap, exact / std::max(1.0, std::abs(j_value)));
                        if (diag.fw_gap > opt_.tol) {
                            // a mixed-sign descent direction the uniform
                            // selections cannot express: step toward the
                            // certificate optimizer
                            const double lambda = line_search(corrective, +1.0, 1.0);
                            if (lambda > 1e-14) {
                                apply_fw_step(std::move(corrective), lambda);
                                conj_target.reset();
                                stepped_alt = true;
                                zero_steps = 0;
                            }
                        }
                    }
                }
            }
            if (diag.fw_gap <= opt_.tol) {
                diag.converged = true;
                break;
            }
            if (stepped_alt) continue;
            if (zero_steps > 24) break;  // stationary under every tested direction

            // conjugate blend of the oracle vertex with the previous target;
            // the certificate above always prices the raw vertex
            Vertex target = conj_target ? blend_target(*conj_target, vertex, slope) : vertex;
            double target_gain = state_score - (dot(w_x, target.u) + dot(w_r, target.x_r));
            if (!(target_gain > 0.0)) {
                target = vertex;
                target_gain = gap;
            }

            int away = 0;
            double away_score = -kInf;
            for (std::size_t v = 0; v < atoms_.size(); ++v) {
                const double s = dot(w_x, atoms_[v].u) + dot(w_r, atoms_[v].x_r);
                if (s > away_score) {
                    away_score = s;
                    away = static_cast<int>(v);
                }
            }
            const double g_away = away_score - state_score;
            const double wa = weights_[away];
            double lambda = 0.0;
            if (target_gain >= g_away || atoms_.size() == 1 || wa >= 1.0) {
                conj_target = target;
                lambda = line_search(target, +1.0, 1.0);
                apply_fw_step(std::move(target), lambda);
            } else {
                const double lmax = wa / (1.0 - wa);
                lambda = line_search(atoms_[away], -1.0, lmax);
                apply_away_step(away, lambda, lmax);
            }
            zero_steps = lambda <= 1e-14 ? zero_steps + 1 : 0;
            if (iter % 128 == 0) rebuild_state();
        }
        return finalize(diag);
    }

    // Exact stationarity certificate for the nonsmooth PWL objective: the
    // tightest FW gap over all subgradient selections equals, by minimax
    // duality, the most negative directional derivative over the feasible
    // set. That is an LP with per-arc V-shaped deviation costs, solved here
    // explicitly with arc-commodity variables. Returns the absolute gap, or
    // a negative value when the instance is too large for the explicit LP.
    double exact_stationarity_gap(double j_value, const std::vector<double>& t,
                                  Vertex* corrective = nullptr) {
        if (prog_.rho != 1.0) return -1.0;  // the lower model needs g to track f
        const int S = static_cast<int>(sources_.size());
        const int M = prog_.catalog ? static_cast<int>(prog_.catalog->requests.size()) : 0;
        const int rows = M + S * nv_ + nv_ + 2 * na_;
        const std::size_t cols_estimate =
            static_cast<std::size_t>(na_) * S + columns_.size() + 5 * na_ + rows;
        if (rows > 900 || cols_estimate > 25000) return -1.0;

        std::vector<int> origin_index(nv_ + 1, -1);
        for (int i = 0; i < S; ++i) origin_index[sources_[i]] = i;
        const int conservation0 = M;
        const int balance0 = M + S * nv_;
        const int linking0 = balance0 + nv_;
        auto cons_row = [&](int origin, int vertex) {
            return conservation0 + origin_index[origin] * nv_ + (vertex - 1);
        };

        std::vector<LpColumn> cols;
        std::vector<double> cost;
        std::vector<int> slack_cols_tmp;
        // gamma block: demand coverage plus the leg demands it imposes on the
        // conservation rows of each leg's commodity
        for (const GammaColumn& gc : columns_) {
            LpColumn col;
            if (gc.m == gc.n) col.add(gc.m, 2.0);
            else {
                col.add(gc.m, 1.0);
                col.add(gc.n, 1.0);
            }
            for (const PoolLeg& leg : *gc.legs) {
                col.add(cons_row(leg.from, leg.to), -1.0);
                col.add(cons_row(leg.from, leg.from), +1.0);
            }
            cols.push_back(col);
            cost.push_back(0.0);
        }
        const int x_base = static_cast<int>(cols.size());
        for (int oi = 0; oi < S; ++oi) {
            for (int a = 0; a < na_; ++a) {
                const Arc& arc = net_->arc(a);
                LpColumn col;
                col.add(conservation0 + oi * nv_ + (arc.head - 1), +1.0);
                col.add(conservation0 + oi * nv_ + (arc.tail - 1), -1.0);
                col.add(balance0 + (arc.head - 1), +1.0);
                col.add(balance0 + (arc.tail - 1), -1.0);
                col.add(linking0 + a, +1.0);
                cols.push_back(col);
                cost.push_back(t[a]);
            }
        }
        const int xr_base = static_cast<int>(cols.size());
        for (int a = 0; a < na_; ++a) {
            const Arc& arc = net_->arc(a);
            LpColumn col;
            col.add(balance0 + (arc.head - 1), +1.0);
            col.add(balance0 + (arc.tail - 1), -1.0);
            col.add(linking0 + a, +1.0);
            cols.push_back(col);
            cost.push_back(prog_.rho * t[a]);
        }
        // deviation split; the travel time is piecewise linear, so the
        // price of moving across the breakpoint is modeled exactly with a
        // capped near-slope piece followed by the far slope
        const int cap0 = linking0 + na_;
        std::vector<double> cap_rhs(na_, 0.0);
        for (int a = 0; a < na_; ++a) {
            const double f = state_.u[a] + state_.x_r[a] + prog_.x_p[a];
            const double g = state_.u[a] + prog_.rho * state_.x_r[a];
            const ArcPwl& pw = prog_.law.pwl.arcs[a];
            const double s0 = pw.seg[0].slope, s1 = pw.seg[1].slope;
            const double band = 1e-9 * std::max(1.0, pw.breakpoint);
            LpColumn knee, slack;
            knee.add(cap0 + a, 1.0);
            slack.add(cap0 + a, 1.0);
            if (f < pw.breakpoint - band) {
                // increases pay s0 until the breakpoint, then s1
                knee.add(linking0 + a, -1.0);
                cap_rhs[a] = pw.breakpoint - f;
                cost.push_back(g * s0);
                cols.push_back(knee);
                LpColumn up, down;
                up.add(linking0 + a, -1.0);
                down.add(linking0 + a, +1.0);
                cols.push_back(up);
                cost.push_back(g * s1);
                cols.push_back(down);
                cost.push_back(-g * s0);
            } else if (f > pw.breakpoint + band) {
                // decreases recover s1 until the breakpoint, then s0
                knee.add(linking0 + a, +1.0);
                cap_rhs[a] = f - pw.breakpoint;
                cost.push_back(-g * s1);
                cols.push_back(knee);
                LpColumn up, down;
                up.add(linking0 + a, -1.0);
                down.add(linking0 + a, +1.0);
                cols.push_back(up);
                cost.push_back(g * s1);
                cols.push_back(down);
                cost.push_back(-g * s0);
            } else {
                // at the kink: the sided slopes apply immediately
                cap_rhs[a] = 0.0;
                cost.push_back(0.0);
                cols.push_back(knee);
                LpColumn up, down;
                up.add(linking0 + a, -1.0);
                down.add(linking0 + a, +1.0);
                cols.push_back(up);
                cost.push_back(g * s1);
                cols.push_back(down);
                cost.push_back(-g * s0);
            }
            slack_cols_tmp.push_back(static_cast<int>(cols.size()));
            cols.push_back(slack);
            cost.push_back(0.0);
        }

        std::vector<double> rhs(rows, 0.0);
        for (int a = 0; a < na_; ++a) rhs[cap0 + a] = cap_rhs[a];
        for (int m = 0; m < M; ++m) rhs[m] = prog_.catalog->requests[m].rate;
        for (const OdDemand& d : prog_.fixed_demand) {
            rhs[cons_row(d.origin, d.dest)] += d.rate;
            rhs[cons_row(d.origin, d.origin)] -= d.rate;
        }
        for (int a = 0; a < na_; ++a) rhs[linking0 + a] = state_.u[a] + state_.x_r[a];

        // artificial start; z itself is feasible, so the optimum drops them
        double w_max = 1.0;
        for (double c : cost) w_max = std::max(w_max, std::abs(c));
        const double big = 1e8 * w_max;
        std::vector<int> basis;
        for (int r = 0; r < cap0; ++r) {
            LpColumn col;
            col.add(r, rhs[r] >= 0.0 ? 1.0 : -1.0);
            basis.push_back(static_cast<int>(cols.size()));
            cols.push_back(col);
            cost.push_back(big);
        }
        // cap rows start on their own slack
        for (int a = 0; a < na_; ++a) basis.push_back(slack_cols_tmp[a]);
        EqualityLp lp(rows, std::move(cols), rhs, std::move(basis));
        const double opt = lp.solve(cost);
        for (const auto& [col, value] : lp.primal_sparse())
            if (cost[col] >= big && value > 1e-6 * alpha_scale_)
                return -1.0;  // artificial stuck: certificate unavailable


        if (corrective) {
            corrective->X = Matrix(na_, nv_);
            corrective->u.assign(na_, 0.0);
            corrective->x_r.assign(na_, 0.0);
            corrective->gamma.clear();
            for (const auto& [col, value] : lp.primal_sparse()) {
                if (col < n_gamma_) {
                    corrective->gamma.push_back({col, value});
                } else if (col >= x_base && col < xr_base) {
                    const int a = (col - x_base) % na_;
                    const int origin = sources_[(col - x_base) / na_];
                    corrective->X(a, origin - 1) += value;
                    corrective->u[a] += value;
                } else if (col >= xr_base && col < xr_base + na_) {
                    corrective->x_r[col - xr_base] = value;
                }
            }
        }
        // clamp LP rounding noise; -1 stays the unavailable sentinel
        return std::max(0.0, j_value - opt);
    }

    // beta*prev + (1-beta)*vertex with beta from Hessian-conjugacy of the
    // total-flow directions, as in conjugate Frank-Wolfe.
    Vertex blend_target(const Vertex& prev, const Vertex& vertex,
                        const std::vector<double>& slope) const {
        double hd2 = 0.0, hdy = 0.0;
        for (int a = 0; a < na_; ++a) {
            const double d_prev =
                (prev.u[a] + prev.x_r[a]) - (state_.u[a] + state_.x_r[a]);
            const double d_new =
                (vertex.u[a] + vertex.x_r[a]) - (state_.u[a] + state_.x_r[a]);
            hd2 += slope[a] * d_prev * d_prev;
            hdy += slope[a] * d_prev * d_new;
        }
        const double denom = hdy - hd2;
        double beta = 0.0;
        if (std::abs(denom) > 1e-30) beta = std::clamp(hdy / denom, 0.0, 0.99);
        if (beta <= 0.0) return vertex;

        Vertex out;
        out.X = prev.X;
        out.X.scale(beta);
        out.X.axpy(1.0 - beta, vertex.X);
        out.u.resize(na_);
        out.x_r.resize(na_);
        for (int a = 0; a < na_; ++a) {
            out.u[a] = beta * prev.u[a] + (1.0 - beta) * vertex.u[a];
            out.x_r[a] = beta * prev.x_r[a] + (1.0 - beta) * vertex.x_r[a];
        }
        std::map<int, double> merged;
        for (const auto& [col, value] : prev.gamma) merged[col] += beta * value;
        for (const auto& [col, value] : vertex.gamma) merged[col] += (1.0 - beta) * value;
        out.gamma.assign(merged.begin(), merged.end());
        return out;
    }

private:
    void build_columns() {
        std::set<int> sources;
        for (const OdDemand& d : prog_.fixed_demand) sources.insert(d.origin);
        if (prog_.catalog) {
            const ConfigCatalog& cat = *prog_.catalog;
            const int M = static_cast<int>(cat.requests.size());
            if (static_cast<int>(cat.self_legs.size()) != M)
                throw std::invalid_argument("solve: catalog lacks self-pool entries");
            for (int m = 0; m < M; ++m) columns_.push_back({m, m, 1, &cat.self_legs[m]});
            for (const PairCatalog& p : cat.pairs)
                for (const ConfigOption& o : p.options)
                    columns_.push_back({p.m, p.n, o.c, &o.legs});
            for (const GammaColumn& col : columns_)
                for (const PoolLeg& leg : *col.legs) sources.insert(leg.from);
        }
        sources_.assign(sources.begin(), sources.end());
        n_gamma_ = static_cast<int>(columns_.size());
    }

    void build_lp() {
        const int M = prog_.catalog ? static_cast<int>(prog_.catalog->requests.size()) : 0;
        const int lp_rows = M + nv_ - 1;  // the last divergence row is redundant

        // fixed demand contributes a constant divergence moved to the rhs
        std::vector<double> fixed_div(nv_, 0.0);
        for (const OdDemand& d : prog_.fixed_demand) {
            fixed_div[d.dest - 1] += d.rate;
            fixed_div[d.origin - 1] -= d.rate;
        }
        std::vector<double> rhs(lp_rows, 0.0);
        for (int m = 0; m < M; ++m) rhs[m] = prog_.catalog->requests[m].rate;
        for (int v = 0; v < nv_ - 1; ++v) rhs[M + v] = -fixed_div[v];

        std::vector<LpColumn> cols;
        auto div_entries = [&](LpColumn& col, int first, int last) {
            if (first != last) {
                if (first <= nv_ - 1) col.add(M + first - 1, -1.0);
                if (last <= nv_ - 1) col.add(M + last - 1, +1.0);
            }
        };
        for (const GammaColumn& gc : columns_) {
            LpColumn col;
            if (gc.m == gc.n) {
                col.add(gc.m, 2.0);
            } else {
                col.add(gc.m, 1.0);
                col.add(gc.n, 1.0);
            }
            div_entries(col, gc.legs->front().from, gc.legs->back().to);
            cols.push_back(col);
        }
        arc_col_base_ = static_cast<int>(cols.size());
        for (int a = 0; a < na_; ++a) {
            LpColumn col;
            div_entries(col, net_->arc(a).tail, net_->arc(a).head);
            cols.push_back(col);
        }

        // artificials absorb the residual divergence of the initial self-pool
        // basis; their sign keeps the start primal feasible
        std::vector<double> residual(nv_ - 1);
        for (int v = 0; v < nv_ - 1; ++v) residual[v] = rhs[M + v];
        for (int m = 0; m < M; ++m) {
            const double half = prog_.catalog->requests[m].rate / 2.0;
            const int o = prog_.catalog->self_legs[m].front().from;
            const int d = prog_.catalog->self_legs[m].back().to;
            if (o <= nv_ - 1) residual[o - 1] += half;
            if (d <= nv_ - 1) residual[d - 1] -= half;
        }
        art_col_base_ = static_cast<int>(cols.size());
        std::vector<int> basis;
        for (int m = 0; m < M; ++m) basis.push_back(m);
        for (int v = 0; v < nv_ - 1; ++v) {
            LpColumn col;
            col.add(M + v, residual[v] >= 0.0 ? 1.0 : -1.0);
            basis.push_back(static_cast<int>(cols.size()));
            cols.push_back(col);
        }
        lp_.emplace(lp_rows, std::move(cols), std::move(rhs), std::move(basis));
        lp_costs_.assign(lp_->num_columns(), 0.0);
        alpha_scale_ = 1.0;
        for (int m = 0; m < M; ++m) alpha_scale_ += prog_.catalog->requests[m].rate;
        for (const OdDemand& d : prog_.fixed_demand) alpha_scale_ += d.rate;
    }

    // J at (u, x_r); fills travel times, slopes and the per-arc prices of
    // active and rebalancing flow. `kink_sel` picks the subgradient at PWL
    // kinks: +1 right derivative, 0 midpoint, -1 left derivative.
    double gradient_at(const std::vector<double>& u, const std::vector<double>& x_r,
                       std::vector<double>& t, std::vector<double>& slope,
                       std::vector<double>& w_x, std::vector<double>& w_r,
                       int kink_sel = +1) const {
        double j = 0.0;
        for (int a = 0; a < na_; ++a) {
            const double f = u[a] + x_r[a] + prog_.x_p[a];
            const double g = u[a] + prog_.rho * x_r[a];
            t[a] = prog_.law.arc_time(*net_, a, f);
            slope[a] = prog_.law.arc_time_slope_selected(*net_, a, f, kink_sel);
            w_x[a] = t[a] + slope[a] * g;
            w_r[a] = prog_.rho * t[a] + slope[a] * g;
            j += t[a] * g;
        }
        return j;
    }

    // Exact linear minimization: shortest paths price every routing atom, the
    // LP picks the gamma block jointly with the rebalancing arcs.
    Vertex oracle(const std::vector<double>& w_x, const std::vector<double>& w_r) {
        std::map<int, ShortestPathTree> trees;
        for (int s : sources_) trees.emplace(s, shortest_paths(*net_, w_x, s));

        for (int j = 0; j < n_gamma_; ++j) {
            double k = 0.0;
            for (const PoolLeg& leg : *columns_[j].legs) {
                const double d = trees.at(leg.from).dist[leg.to - 1];
                if (std::isinf(d))
                    throw std::runtime_error("joint program infeasible: leg " +
                                             std::to_string(leg.from) + "->" +
                                             std::to_string(leg.to) + " unreachable");
                k += d;
            }
            lp_costs_[j] = k;
        }
        for (int a = 0; a < na_; ++a) lp_costs_[arc_col_base_ + a] = w_r[a];
        double w_max = 1.0;
        for (int a = 0; a < na_; ++a) w_max = std::max(w_max, std::max(w_x[a], w_r[a]));
        const double big = 1e9 * w_max;
        for (int j = art_col_base_; j < lp_->num_columns(); ++j) lp_costs_[j] = big;

        lp_->solve(lp_costs_);
        Vertex v;
        v.X = Matrix(na_, nv_);
        v.u.assign(na_, 0.0);
        v.x_r.assign(na_, 0.0);
        for (const auto& [col, value] : lp_->primal_sparse()) {
            if (col >= art_col_base_) {
                if (value > 1e-7 * alpha_scale_)
                    throw std::runtime_error(
                        "joint program infeasible: rebalancing requirement unreachable");
                continue;
            }
            if (col >= arc_col_base_) {
                v.x_r[col - arc_col_base_] = value;
                continue;
            }
            v.gamma.push_back({col, value});
            for (const PoolLeg& leg : *columns_[col].legs)
                load_path(v, trees.at(leg.from), leg.from, leg.to, value);
        }
        for (const OdDemand& d : prog_.fixed_demand) {
            const ShortestPathTree& tree = trees.at(d.origin);
            if (std::isinf(tree.dist[d.dest - 1]))
                throw std::runtime_error("demand row unsatisfiable: " + std::to_string(d.origin) +
                                         "->" + std::to_string(d.dest) + " unreachable");
            load_path(v, tree, d.origin, d.dest, d.rate);
        }
        return v;
    }

    void load_path(Vertex& v, const ShortestPathTree& tree, int origin, int dest,
                   double rate) const {
        int at = dest;
        while (at != origin) {
            const int a = tree.pred_arc[at - 1];
            v.X(a, origin - 1) += rate;
            v.u[a] += rate;
            at = net_->arc(a).tail;
        }
    }

    // Exact line search over phi(l) = J(state + l*sign*(atom - state)) by
    // bisection on the monotone derivative. Slopes are taken on the side the
    // direction moves toward, so kink points do not block genuine descent.
    double line_search(const Vertex& atom, double sign, double lmax) const {
        auto dphi = [&](double l) {
            double s = 0.0;
            for (int a = 0; a < na_; ++a) {
                const double du = sign * (atom.u[a] - state_.u[a]);
                const double dr = sign * (atom.x_r[a] - state_.x_r[a]);
                const double u = state_.u[a] + l * du;
                const double xr = state_.x_r[a] + l * dr;
                const double f = std::max(0.0, u + xr + prog_.x_p[a]);
                const double g = u + prog_.rho * xr;
                const double tt = prog_.law.arc_time(*net_, a, f);
                const double df = du + dr;
                const double sl = prog_.law.arc_time_slope_sided(*net_, a, f, df < 0.0 ? -1 : +1);
                s += sl * df * g + tt * (du + prog_.rho * dr);
            }
            return s;
        };
        if (dphi(0.0) >= 0.0) return 0.0;
        if (dphi(lmax) <= 0.0) return lmax;
        double lo = 0.0, hi = lmax;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (dphi(mid) <= 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    void set_state(Vertex&& v) {
        state_.X = v.X;
        state_.u = v.u;
        state_.x_r = v.x_r;
        state_.gamma.assign(n_gamma_, 0.0);
        for (const auto& [col, value] : v.gamma) state_.gamma[col] = value;
        atoms_.clear();
        weights_.clear();
        atoms_.push_back(std::move(v));
        weights_.push_back(1.0);
    }

    void apply_fw_step(Vertex&& target, double lambda) {
        if (lambda >= 1.0) {
            set_state(std::move(target));
            return;
        }
        state_.X.scale(1.0 - lambda);
        state_.X.axpy(lambda, target.X);
        for (int a = 0; a < na_; ++a) {
            state_.u[a] = (1.0 - lambda) * state_.u[a] + lambda * target.u[a];
            state_.x_r[a] = (1.0 - lambda) * state_.x_r[a] + lambda * target.x_r[a];
        }
        for (double& g : state_.gamma) g *= (1.0 - lambda);
        for (const auto& [col, value] : target.gamma) state_.gamma[col] += lambda * value;

        for (double& w : weights_) w *= (1.0 - lambda);
        const int idx = find_atom(target);
        if (idx >= 0) {
            weights_[idx] += lambda;
        } else {
            atoms_.push_back(std::move(target));
            weights_.push_back(lambda);
        }
        prune_atoms();
    }

    void apply_away_step(int away, double lambda, double lmax) {
        const Vertex& atom = atoms_[away];
        state_.X.scale(1.0 + lambda);
        state_.X.axpy(-lambda, atom.X);
        for (int a = 0; a < na_; ++a) {
            state_.u[a] = std::max(0.0, (1.0 + lambda) * state_.u[a] - lambda * atom.u[a]);
            state_.x_r[a] = std::max(0.0, (1.0 + lambda) * state_.x_r[a] - lambda * atom.x_r[a]);
        }
        for (double& g : state_.gamma) g *= (1.0 + lambda);
        for (const auto& [col, value] : atom.gamma)
            state_.gamma[col] = std::max(0.0, state_.gamma[col] - lambda * value);

        for (double& w : weights_) w *= (1.0 + lambda);
        weights_[away] -= lambda;
        if (lambda >= lmax - 1e-15 || weights_[away] <= 1e-14) {
            atoms_.erase(atoms_.begin() + away);
            weights_.erase(weights_.begin() + away);
        }
        prune_atoms();
    }

    int find_atom(const Vertex& v) const {
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const Vertex& o = atoms_[i];
            bool same = true;
            for (int a = 0; a < na_ && same; ++a)
                same = std::abs(o.u[a] - v.u[a]) <= 1e-10 && std::abs(o.x_r[a] - v.x_r[a]) <= 1e-10;
            if (!same || o.gamma != v.gamma) continue;
            double dx = 0.0;
            for (int a = 0; a < na_; ++a)
                for (int j = 0; j < nv_; ++j) dx = std::max(dx, std::abs(o.X(a, j) - v.X(a, j)));
            if (dx <= 1e-10) return static_cast<int>(i);
        }
        return -1;
    }

    void prune_atoms() {
        for (std::size_t i = atoms_.size(); i-- > 0;) {
            if (weights_[i] <= 1e-14) {
                atoms_.erase(atoms_.begin() + i);
                weights_.erase(weights_.begin() + i);
            }
        }
    }

    void rebuild_state() {
        double sum = 0.0;
        for (double w : weights_) sum += w;
        if (sum > 0.0)
            for (double& w : weights_) w /= sum;
        State z;
        z.X = Matrix(na_, nv_);
        z.u.assign(na_, 0.0);
        z.x_r.assign(na_, 0.0);
        z.gamma.assign(n_gamma_, 0.0);
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            z.X.axpy(weights_[i], atoms_[i].X);
            for (int a = 0; a < na_; ++a) {
                z.u[a] += weights_[i] * atoms_[i].u[a];
                z.x_r[a] += weights_[i] * atoms_[i].x_r[a];
            }
            for (const auto& [col, value] : atoms_[i].gamma)
                z.gamma[col] += weights_[i] * value;
        }
        state_ = std::move(z);
    }

    FlowSolution finalize(SolverDiagnostics diag) {
        FlowSolution sol;
        sol.X = state_.X;
        sol.x_r = state_.x_r;
        sol.x_p = prog_.x_p;
        sol.t.assign(na_, 0.0);
        sol.objective = 0.0;
        for (int a = 0; a < na_; ++a) {
            const double f = state_.u[a] + state_.x_r[a] + prog_.x_p[a];
            sol.t[a] = prog_.law.arc_time(*net_, a, f);
            sol.objective += sol.t[a] * (state_.u[a] + prog_.rho * state_.x_r[a]);
        }
        for (int j = 0; j < n_gamma_; ++j)
            if (state_.gamma[j] > 1e-12)
                sol.gamma[{columns_[j].m, columns_[j].n, columns_[j].c}] = state_.gamma[j];

        Matrix target(nv_, nv_);
        for (int j = 0; j < n_gamma_; ++j) {
            const double g = state_.gamma[j];
            if (g <= 0.0) continue;
            for (const PoolLeg& leg : *columns_[j].legs) {
                target(leg.to - 1, leg.from - 1) += g;
                target(leg.from - 1, leg.from - 1) -= g;
            }
        }
        for (const OdDemand& d : prog_.fixed_demand) {
            target(d.dest - 1, d.origin - 1) += d.rate;
            target(d.origin - 1, d.origin - 1) -= d.rate;
        }
        diag.conservation_residual = conservation_residual(*net_, sol.X, target);
        std::vector<double> total(na_);
        for (int a = 0; a < na_; ++a) total[a] = state_.u[a] + state_.x_r[a];
        for (double v : divergence(*net_, total))
            diag.rebalance_residual = std::max(diag.rebalance_residual, std::abs(v));
        if (prog_.catalog) {
            const int M = static_cast<int>(prog_.catalog->requests.size());
            std::vector<double> cover(M, 0.0);
            for (int j = 0; j < n_gamma_; ++j) {
                if (columns_[j].m == columns_[j].n) cover[columns_[j].m] += 2.0 * state_.gamma[j];
                else {
                    cover[columns_[j].m] += state_.gamma[j];
                    cover[columns_[j].n] += state_.gamma[j];
                }
            }
            for (int m = 0; m < M; ++m)
                diag.demand_residual = std::max(
                    diag.demand_residual, std::abs(cover[m] - prog_.catalog->requests[m].rate));
        }
        sol.diag = diag;
        return sol;
    }

    const ConvexProgram& prog_;
    SolveOptions opt_;
    const Network* net_ = nullptr;
    int na_ = 0, nv_ = 0;
    std::vector<GammaColumn> columns_;
    std::vector<int> sources_;
    std::optional<EqualityLp> lp_;
    std::vector<double> lp_costs_;
    int n_gamma_ = 0, arc_col_base_ = 0, art_col_base_ = 0;
    double alpha_scale_ = 1.0;

    State state_;
    std::vector<Vertex> atoms_;
    std::vector<double> weights_;
};

}  // namespace

ConvexProgram assemble_joint(const Network& net, const ConfigCatalog& catalog,
                             const TravelTimeLaw& law, double rho,
                             const std::vector<double>& x_p, const Matrix* fixed_demand) {
    ConvexProgram prog;
    prog.net = &net;
    prog.law = law;
    prog.rho = rho;
    prog.x_p = x_p;
    prog.catalog = &catalog;
    if (catalog.self_legs.size() != catalog.requests.size())
        throw std::invalid_argument("assemble_joint: catalog lacks self-pool entries");
    validate_requests(catalog.requests, net.num_vertices());
    if (fixed_demand) prog.fixed_demand = demand_list(*fixed_demand);
    return prog;
}

FlowSolution solve(const ConvexProgram& program, const SolveOptions& options) {
    Engine engine(program, options);
    return engine.run();
}

FlowSolution solve_routing(const Network& net, const Matrix& drp, const TravelTimeLaw& law,
                           double rho, const std::vector<double>& x_p,
                           const SolveOptions& options) {
    ConvexProgram prog;
    prog.net = &net;
    prog.law = law;
    prog.rho = rho;
    prog.x_p = x_p;
    prog.fixed_demand = demand_list(drp);
    return solve(prog, options);
}

std::vector<double> rebalancing_feasibility_check(const Network& net, const Matrix& X) {
    if (X.rows() != net.num_arcs() || X.cols() != net.num_vertices())
        throw std::invalid_argument("rebalancing_feasibility_check: dimension mismatch");
    // x_r needs inflow-outflow equal to the aggregate outflow-inflow of X*1
    const std::vector<double> required = divergence(net, X.row_sums());
    return min_cost_divergence_flow(net, net.free_flow_times(), required).arc_flow;
}

double conservation_residual(const Network& net, const Matrix& X, const Matrix& demand) {
    const int na = net.num_arcs();
    const int nv = net.num_vertices();
    if (X.rows() != na || X.cols() != nv || demand.rows() != nv || demand.cols() != nv)
        throw std::invalid_argument("conservation_residual: dimension mismatch");
    double worst = 0.0;
    std::vector<double> div(nv);
    for (int j = 0; j < nv; ++j) {
        std::fill(div.begin(), div.end(), 0.0);
        for (int a = 0; a < na; ++a) {
            const double f = X(a, j);
            if (f == 0.0) continue;
            div[net.arc(a).head - 1] += f;
            div[net.arc(a).tail - 1] -= f;
        }
        for (int i = 0; i < nv; ++i) worst = std::max(worst, std::abs(div[i] - demand(i, j)));
    }
    return worst;
}

std::vector<OdDemand> demand_list(const Matrix& demand, double tol) {
    const int nv = demand.rows();
    if (demand.cols() != nv) throw std::invalid_argument("demand_list: matrix must be square");
    double scale = 1.0;
    for (int j = 0; j < nv; ++j)
        for (int i = 0; i < nv; ++i) scale = std::max(scale, std::abs(demand(i, j)));
    std::vector<OdDemand> out;
    for (int j = 0; j < nv; ++j) {
        double col = 0.0;
        for (int i = 0; i < nv; ++i) {
            col += demand(i, j);
            if (i == j) continue;
            const double v = demand(i, j);
            if (v < -tol * scale)
                throw std::invalid_argument("demand_list: negative off-diagonal entry");
            if (v > 0.0) out.push_back({j + 1, i + 1, v});
        }
        if (std::abs(col) > tol * scale)
            throw std::invalid_argument("demand_list: column " + std::to_string(j + 1) +
                                        " does not sum to zero");
    }
    return out;
}

Matrix drp_from_gamma(const ConfigCatalog& catalog, const std::map<GammaKey, double>& gamma,
                      int num_vertices) {
    Matrix d(num_vertices, num_vertices);
    for (const auto& [key, value] : gamma) {
        const auto [m, n, c] = key;
        const std::vector<PoolLeg>* legs = nullptr;
        if (m == n) {
            legs = &catalog.self_legs[m];
        } else {
            const PairCatalog* pc = catalog.find_pair(m, n);
            if (!pc) throw std::invalid_argument("drp_from_gamma: pair not in catalog");
            for (const ConfigOption& o : pc->options)
                if (o.c == c) legs = &o.legs;
            if (!legs) throw std::invalid_argument("drp_from_gamma: config not in catalog");
        }
        for (const PoolLeg& leg : *legs) {
            d(leg.to - 1, leg.from - 1) += value;
            d(leg.from - 1, leg.from - 1) -= value;
        }
    }
    return d;
}

}  // namespace amod
