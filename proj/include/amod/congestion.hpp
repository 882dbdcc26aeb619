#pragma once

#include <array>
#include <vector>

#include "amod/matrix.hpp"
#include "amod/network.hpp"

namespace amod {

struct BprParams {
    double alpha = 0.15;
    double beta = 4.0;
};

// t = t0 * (1 + alpha * (flow/kappa)^beta)
double bpr_time(double t0, double kappa, const BprParams& p, double total_flow);
double bpr_time_slope(double t0, double kappa, const BprParams& p, double total_flow);

struct PwlSegment {
    double slope = 0.0;      // [h per veh/h]
    double intercept = 0.0;  // [h]
};

// Two-segment secant approximation of the BPR curve for one arc. Segment 0 is
// the secant on [0, theta*kappa] anchored at t0, segment 1 the secant on
// [theta*kappa, 2*theta*kappa]; their max is convex and continuous at the
// breakpoint.
struct ArcPwl {
    std::array<PwlSegment, 2> seg;
    double breakpoint = 0.0;  // theta * kappa

    double time(double flow) const {
        return std::max(seg[0].intercept + seg[0].slope * flow,
                        seg[1].intercept + seg[1].slope * flow);
    }
    // Right derivative: at the kink the steeper segment wins.
    double slope(double flow) const {
        const double v0 = seg[0].intercept + seg[0].slope * flow;
        const double v1 = seg[1].intercept + seg[1].slope * flow;
        if (v1 >= v0) return seg[1].slope;
        return seg[0].slope;
    }
};

ArcPwl fit_two_line(double t0, double kappa, const BprParams& p, double theta);

struct PwlTravelTime {
    double theta = 1.0;
    std::vector<ArcPwl> arcs;
};

PwlTravelTime fit_two_line(const Network& net, double theta);

enum class TimeLaw { bpr, pwl };

// Travel-time law applied per arc; BPR parameters come from the network arcs,
// the PWL variant carries its fitted segments.
struct TravelTimeLaw {
    TimeLaw kind = TimeLaw::bpr;
    PwlTravelTime pwl;

    static TravelTimeLaw bpr() { return {}; }
    static TravelTimeLaw two_line(const Network& net, double theta) {
        return {TimeLaw::pwl, fit_two_line(net, theta)};
    }

    double arc_time(const Network& net, int a, double flow) const;
    double arc_time_slope(const Network& net, int a, double flow) const;
    // one-sided slope: side < 0 gives the left derivative at PWL kinks
    double arc_time_slope_sided(const Network& net, int a, double flow, int side) const;
    // slope under a kink subgradient selection: +1 right, 0 mid, -1 left
    double arc_time_slope_selected(const Network& net, int a, double flow, int kink_sel) const;
    // whether the flow sits on a kink of the law (always false for BPR)
    bool at_kink(int a, double flow) const;
};

// Per-arc travel times at total flow X*1 + x_r + x_p.
std::vector<double> travel_time_vector(const Network& net, const Matrix& X,
                                       const std::vector<double>& x_r,
                                       const std::vector<double>& x_p, const TravelTimeLaw& law);

std::vector<double> travel_times_at(const Network& net, const std::vector<double>& total_flow,
                                    const TravelTimeLaw& law);

// sigma = max(0, flow - kappa) / kappa
double link_congestion(double flow, double kappa);

// J = t' * (X*1 + rho * x_r)
double objective(const std::vector<double>& t, const Matrix& X, const std::vector<double>& x_r,
                 double rho);

}  // namespace amod
