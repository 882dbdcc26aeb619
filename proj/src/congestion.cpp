#include "amod/congestion.hpp"

#include <cmath>
#include <stdexcept>

namespace amod {

namespace {
void check_bpr(const BprParams& p) {
    if (!(p.alpha > 0.0)) throw std::invalid_argument("bpr: alpha must be positive");
    if (!(p.beta >= 1.0)) throw std::invalid_argument("bpr: beta must be at least 1");
}
}  // namespace

double bpr_time(double t0, double kappa, const BprParams& p, double total_flow) {
    check_bpr(p);
    if (total_flow < 0.0) throw std::invalid_argument("bpr: negative flow");
    return t0 * (1.0 + p.alpha * std::pow(total_flow / kappa, p.beta));
}

double bpr_time_slope(double t0, double kappa, const BprParams& p, double total_flow) {
    check_bpr(p);
    if (total_flow < 0.0) throw std::invalid_argument("bpr: negative flow");
    return t0 * p.alpha * p.beta * std::pow(total_flow / kappa, p.beta - 1.0) / kappa;
}

ArcPwl fit_two_line(double t0, double kappa, const BprParams& p, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("fit_two_line: theta must be positive");
    const double f1 = theta * kappa;
    const double y0 = t0;
    const double y1 = bpr_time(t0, kappa, p, f1);
    const double y2 = bpr_time(t0, kappa, p, 2.0 * f1);
    ArcPwl out;
    out.breakpoint = f1;
    out.seg[0] = {(y1 - y0) / f1, y0};
    out.seg[1] = {(y2 - y1) / f1, y1 - (y2 - y1) / f1 * f1};
    return out;
}

PwlTravelTime fit_two_line(const Network& net, double theta) {
    PwlTravelTime out;
    out.theta = theta;
    out.arcs.reserve(net.num_arcs());
    for (const Arc& a : net.arcs())
        out.arcs.push_back(fit_two_line(a.t0, a.capacity, {a.bpr_alpha, a.bpr_beta}, theta));
    return out;
}

double TravelTimeLaw::arc_time(const Network& net, int a, double flow) const {
    const Arc& arc = net.arc(a);
    if (kind == TimeLaw::bpr)
        return bpr_time(arc.t0, arc.capacity, {arc.bpr_alpha, arc.bpr_beta}, flow);
    return pwl.arcs[a].time(flow);
}

double TravelTimeLaw::arc_time_slope(const Network& net, int a, double flow) const {
    const Arc& arc = net.arc(a);
    if (kind == TimeLaw::bpr)
        return bpr_time_slope(arc.t0, arc.capacity, {arc.bpr_alpha, arc.bpr_beta}, flow);
    return pwl.arcs[a].slope(flow);
}

double TravelTimeLaw::arc_time_slope_sided(const Network& net, int a, double flow,
                                           int side) const {
    if (kind == TimeLaw::bpr) return arc_time_slope(net, a, flow);
    // points within rounding distance of the breakpoint count as the kink:
    // a step in either direction immediately pays that side's slope
    const ArcPwl& p = pwl.arcs[a];
    const double band = 1e-9 * std::max(1.0, p.breakpoint);
    if (flow < p.breakpoint - band) return p.seg[0].slope;
    if (flow > p.breakpoint + band) return p.seg[1].slope;
    return side < 0 ? p.seg[0].slope : p.seg[1].slope;
}

bool TravelTimeLaw::at_kink(int a, double flow) const {
    if (kind == TimeLaw::bpr) return false;
    const ArcPwl& p = pwl.arcs[a];
    return std::abs(flow - p.breakpoint) <= 1e-9 * std::max(1.0, p.breakpoint);
}

// gradient slope under a kink-selection rule: +1 right, 0 midpoint, -1 left
double TravelTimeLaw::arc_time_slope_selected(const Network& net, int a, double flow,
                                              int kink_sel) const {
    if (kind == TimeLaw::bpr) return arc_time_slope(net, a, flow);
    if (kink_sel > 0) return arc_time_slope_sided(net, a, flow, +1);
    if (kink_sel < 0) return arc_time_slope_sided(net, a, flow, -1);
    return 0.5 * (arc_time_slope_sided(net, a, flow, -1) +
                  arc_time_slope_sided(net, a, flow, +1));
}

std::vector<double> travel_time_vector(const Network& net, const Matrix& X,
                                       const std::vector<double>& x_r,
                                       const std::vector<double>& x_p, const TravelTimeLaw& law) {
    const int na = net.num_arcs();
    if (X.rows() != na || static_cast<int>(x_r.size()) != na ||
        static_cast<int>(x_p.size()) != na)
        throw std::invalid_argument("travel_time_vector: dimension mismatch");
    std::vector<double> total = X.row_sums();
    for (int a = 0; a < na; ++a) {
        if (total[a] < 0.0 || x_r[a] < 0.0 || x_p[a] < 0.0)
            throw std::invalid_argument("travel_time_vector: negative flow");
        total[a] += x_r[a] + x_p[a];
    }
    return travel_times_at(net, total, law);
}

std::vector<double> travel_times_at(const Network& net, const std::vector<double>& total_flow,
                                    const TravelTimeLaw& law) {
    if (static_cast<int>(total_flow.size()) != net.num_arcs())
        throw std::invalid_argument("travel_times_at: dimension mismatch");
    std::vector<double> t(total_flow.size());
    for (int a = 0; a < net.num_arcs(); ++a) t[a] = law.arc_time(net, a, total_flow[a]);
    return t;
}

double link_congestion(double flow, double kappa) {
    if (flow < 0.0) throw std::invalid_argument("link_congestion: negative flow");
    return std::max(0.0, flow - kappa) / kappa;
}

double objective(const std::vector<double>& t, const Matrix& X, const std::vector<double>& x_r,
                 double rho) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("objective: rho outside [0,1]");
    const int na = X.rows();
    if (static_cast<int>(t.size()) != na || static_cast<int>(x_r.size()) != na)
        throw std::invalid_argument("objective: dimension mismatch");
    const std::vector<double> u = X.row_sums();
    double j = 0.0;
    for (int a = 0; a < na; ++a) j += t[a] * (u[a] + rho * x_r[a]);
    return j;
}

}  // namespace amod
