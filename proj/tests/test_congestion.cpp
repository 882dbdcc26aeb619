#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "amod/congestion.hpp"

using namespace amod;

TEST_CASE("bpr values at the reference points") {
    BprParams p;
    CHECK(bpr_time(2.0, 100.0, p, 0.0) == doctest::Approx(2.0));
    CHECK(bpr_time(2.0, 100.0, p, 100.0) == doctest::Approx(2.0 * 1.15));
    CHECK(bpr_time(2.0, 100.0, p, 200.0) == doctest::Approx(2.0 * 3.4));
    CHECK_THROWS(bpr_time(2.0, 100.0, p, -1.0));
    CHECK_THROWS(bpr_time(2.0, 100.0, {0.0, 4.0}, 1.0));
    CHECK_THROWS(bpr_time(2.0, 100.0, {0.15, 0.5}, 1.0));
}

TEST_CASE("bpr is strictly increasing and convex on a grid") {
    BprParams p;
    double prev = bpr_time(1.0, 10.0, p, 0.0);
    double prev_diff = 0.0;
    for (int k = 1; k <= 40; ++k) {
        const double f = 0.5 * k;
        const double t = bpr_time(1.0, 10.0, p, f);
        CHECK(t > prev);
        const double diff = t - prev;
        CHECK(diff >= prev_diff - 1e-12);  // nondecreasing increments
        prev = t;
        prev_diff = diff;
    }
}

TEST_CASE("two-line fit anchors and continuity") {
    BprParams p;
    ArcPwl fit = fit_two_line(1.0, 10.0, p, 1.0);
    CHECK(fit.seg[0].intercept == doctest::Approx(1.0));
    CHECK(fit.seg[0].slope == doctest::Approx(0.15 / 10.0));
    // both segments agree at the breakpoint
    CHECK(fit.seg[0].intercept + fit.seg[0].slope * fit.breakpoint ==
          doctest::Approx(fit.seg[1].intercept + fit.seg[1].slope * fit.breakpoint));
    // convex envelope: slopes nondecreasing
    CHECK(fit.seg[1].slope >= fit.seg[0].slope);
    CHECK_THROWS(fit_two_line(1.0, 10.0, p, 0.0));
}

TEST_CASE("two-line fit error against a dense bpr grid") {
    BprParams p;
    ArcPwl fit = fit_two_line(1.0, 1.0, p, 1.0);
    double max_rel = 0.0;
    for (int k = 0; k <= 2000; ++k) {
        const double f = 2.0 * k / 2000.0;
        const double exact = bpr_time(1.0, 1.0, p, f);
        max_rel = std::max(max_rel, std::abs(fit.time(f) - exact) / exact);
    }
    MESSAGE("two-line max relative error on [0,2k], theta=1: ", max_rel);
    CHECK(max_rel > 0.0);
    CHECK(max_rel < 0.35);
}

TEST_CASE("travel time vector under both laws") {
    Network net(2, {{1, 2, 1.0, 10.0, 0.15, 4.0}});
    Matrix X(1, 2);
    std::vector<double> xr{0.0}, xp{0.0};

    auto t0 = travel_time_vector(net, X, xr, xp, TravelTimeLaw::bpr());
    CHECK(t0[0] == doctest::Approx(1.0));

    xp[0] = 10.0;  // private flow at capacity
    auto t1 = travel_time_vector(net, X, xr, xp, TravelTimeLaw::bpr());
    CHECK(t1[0] == doctest::Approx(1.15));

    // bpr and pwl agree at the breakpoint by construction
    auto law = TravelTimeLaw::two_line(net, 1.0);
    auto t2 = travel_time_vector(net, X, xr, xp, law);
    CHECK(t2[0] == doctest::Approx(1.15).epsilon(1e-9));

    xr = {1.0, 2.0};
    CHECK_THROWS(travel_time_vector(net, X, xr, xp, law));
}

TEST_CASE("pwl slopes are nondecreasing across every arc") {
    Network net(3, {{1, 2, 1.0, 10.0, 0.15, 4.0}, {2, 3, 0.5, 3.0, 0.3, 2.0}});
    auto law = TravelTimeLaw::two_line(net, 0.8);
    for (const ArcPwl& arc : law.pwl.arcs) CHECK(arc.seg[1].slope >= arc.seg[0].slope - 1e-15);
}

TEST_CASE("link congestion") {
    CHECK(link_congestion(10.0, 10.0) == 0.0);
    CHECK(link_congestion(15.0, 10.0) == doctest::Approx(0.5));
    CHECK(link_congestion(0.0, 10.0) == 0.0);
    CHECK_THROWS(link_congestion(-1.0, 10.0));
}

TEST_CASE("objective inner product") {
    Matrix X(1, 2);
    X(0, 0) = 3.0;
    std::vector<double> t{2.0}, xr{1.0};
    CHECK(objective(t, X, xr, 1.0) == doctest::Approx(8.0));
    CHECK(objective(t, X, xr, 0.0) == doctest::Approx(6.0));
    Matrix zero(1, 2);
    CHECK(objective(t, zero, {0.0}, 1.0) == 0.0);
    CHECK_THROWS(objective(t, X, xr, 2.0));
}

TEST_CASE("rebalancing weight never reduces the objective") {
    Matrix X(2, 2);
    X(0, 0) = 1.0;
    X(1, 1) = 2.0;
    std::vector<double> t{1.0, 3.0}, xr{0.5, 0.25};
    CHECK(objective(t, X, xr, 1.0) >= objective(t, X, xr, 0.0));
}
