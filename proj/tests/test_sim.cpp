#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "reachplan/sim.hpp"

using namespace reachplan;
using namespace reachplan::sim;

namespace {

reach::AffineStepDynamics drift1(double rate) {
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0}};
    dyn.B = {0.0};
    dyn.c = {rate};
    return dyn;
}

reach::AffineStepDynamics double_integrator() {
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0, 1.0}, {0.0, 0.0}};
    dyn.B = {0.0, 1.0};
    dyn.c = {0.0, 0.0};
    return dyn;
}

}  // namespace

TEST_SUITE_BEGIN("sim");

TEST_CASE("halton radical inverse in bases 2 and 3") {
    CHECK(halton(1, 2) == doctest::Approx(0.5));
    CHECK(halton(2, 2) == doctest::Approx(0.25));
    CHECK(halton(3, 2) == doctest::Approx(0.75));
    CHECK(halton(4, 2) == doctest::Approx(0.125));
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(halton(2, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(halton(3, 3) == doctest::Approx(1.0 / 9.0));
    CHECK(halton(0, 2) == 0.0);
}

TEST_CASE("halton points: deterministic, inside the box, low-discrepancy") {
    IntervalBox box({-2.0, 10.0, 0.0}, {2.0, 11.0, 0.0});
    Vec p1 = halton_point(1, box);
    CHECK(p1[0] == doctest::Approx(0.0));          // base 2: 0.5 of [-2, 2]
    CHECK(p1[1] == doctest::Approx(10.0 + 1.0 / 3.0));  // base 3
    CHECK(p1[2] == 0.0);                           // degenerate dim
    for (std::uint64_t i = 1; i <= 500; ++i) {
        Vec x = halton_point(i, box);
        CHECK(box.contains(x));
        Vec y = halton_point(i, box);
        CHECK(x == y);
    }
    CHECK_THROWS(halton_point(1, IntervalBox(Vec(20, 0.0), Vec(20, 1.0))));
}

TEST_CASE("simulate: drift trajectory bookkeeping") {
    auto dyn = drift1(2.0);
    SimConfig cfg;
    cfg.delta_c = 0.5;
    cfg.t0 = 6.0;
    cfg.steps = 4;
    cfg.tag_of = [](int) { return std::string("cruise"); };
    Trajectory tr = simulate(dyn, {5.0}, [](const Vec&, int) { return 0.0; },
                             cfg);
    REQUIRE(tr.points.size() == 5);  // steps + final state
    CHECK_FALSE(tr.hit_unsafe);
    for (int k = 0; k < 5; ++k) {
        CHECK(tr.points[k].step_index == k);
        CHECK(tr.points[k].t == doctest::Approx(6.0 + 0.5 * k));
        CHECK(tr.points[k].state[0] == doctest::Approx(5.0 + 1.0 * k));
    }
    CHECK(tr.points[0].tag == "cruise");
    CHECK(tr.points[4].tag == "");  // final state carries no control
}

TEST_CASE("simulate: constant acceleration closed form") {
    auto dyn = double_integrator();
    SimConfig cfg;
    cfg.delta_c = 0.5;
    cfg.steps = 2;
    Trajectory tr = simulate(dyn, {0.0, 0.0},
                             [](const Vec&, int) { return 1.0; }, cfg);
    REQUIRE(tr.points.size() == 3);
    // After 1 s at a = 1: v = 1, p = 0.5.
    CHECK(tr.points[2].state[0] == doctest::Approx(0.5));
    CHECK(tr.points[2].state[1] == doctest::Approx(1.0));
    CHECK(tr.points[1].state[0] == doctest::Approx(0.125));
    CHECK(tr.points[1].u == doctest::Approx(1.0));
}

TEST_CASE("simulate: in-step unsafe detection stops the rollout") {
    auto dyn = drift1(2.0);
    SimConfig cfg;
    cfg.delta_c = 0.5;
    cfg.steps = 10;
    cfg.unsafe_samples_per_step = 4;
    auto band = reach::UnsafeRegion::box(1, {{0, {1.2, 1.8}}});
    Trajectory tr = simulate(dyn, {0.0}, [](const Vec&, int) { return 0.0; },
                             cfg, &band);
    CHECK(tr.hit_unsafe);
    CHECK(tr.unsafe_step == 2);  // p covers [1, 2] during step 2
    CHECK(tr.points.back().step_index == 1);  // rollout ends at the hit

    auto far = reach::UnsafeRegion::box(1, {{0, {100.0, 101.0}}});
    Trajectory clean = simulate(dyn, {0.0},
                                [](const Vec&, int) { return 0.0; }, cfg, &far);
    CHECK_FALSE(clean.hit_unsafe);
    CHECK(clean.unsafe_step == -1);
}

TEST_CASE("simulate applies discrete state events at step starts") {
    // x = (w, t): w resets to 9 once t >= 1.
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0, 0.0}, {0.0, 0.0}};
    dyn.B = {0.0, 0.0};
    dyn.c = {0.0, 1.0};
    dyn.state_event = [](Vec& x) {
        if (x[1] >= 1.0 - 1e-9) x[0] = 9.0;
    };
    SimConfig cfg;
    cfg.delta_c = 1.0;
    cfg.steps = 3;
    Trajectory tr = simulate(dyn, {0.0, 0.0},
                             [](const Vec&, int) { return 0.0; }, cfg);
    CHECK(tr.points[0].state[0] == 0.0);  // t = 0: no reset yet
    CHECK(tr.points[1].state[0] == 9.0);  // start of step 2, t = 1
    CHECK(tr.points[2].state[0] == 9.0);
}

TEST_CASE("falsify: finds the lowest-index counterexample deterministically") {
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0}};
    dyn.B = {1.0};
    dyn.c = {0.0};
    auto unsafe = reach::UnsafeRegion::box(1, {{0, {0.45, 0.55}}});
    FalsifyConfig cfg;
    cfg.sim.steps = 1;
    cfg.schedule = {8, 64};
    ControlFactory zero = [] {
        return [](const Vec&, int) { return 0.0; };
    };

    FalsifyResult r = falsify(IntervalBox({0.0}, {1.0}), dyn, zero, unsafe, cfg);
    REQUIRE(r.found);
    // Halton base 2 index 1 is exactly 0.5, inside the band.
    CHECK(r.samples_used == 1);
    CHECK(r.counterexample[0] == doctest::Approx(0.5));
    REQUIRE(r.trace.has_value());
    CHECK(r.trace->hit_unsafe);

    cfg.workers = 4;
    FalsifyResult rp = falsify(IntervalBox({0.0}, {1.0}), dyn, zero, unsafe, cfg);
    REQUIRE(rp.found);
    CHECK(rp.samples_used == r.samples_used);
    CHECK(rp.counterexample[0] == r.counterexample[0]);
}

TEST_CASE("falsify: clean system exhausts the schedule") {
    auto dyn = drift1(1.0);
    auto unsafe = reach::UnsafeRegion::box(1, {{0, {-5.0, -4.0}}});
    FalsifyConfig cfg;
    cfg.sim.steps = 3;
    cfg.schedule = {16, 32};
    FalsifyResult r = falsify(
        IntervalBox({0.0}, {1.0}), dyn,
        [] { return [](const Vec&, int) { return 0.0; }; }, unsafe, cfg);
    CHECK_FALSE(r.found);
    CHECK(r.samples_used == 48);
    CHECK_FALSE(r.trace.has_value());
}

TEST_CASE("containment: flowpipe covers simulated drift, and a shrunken "
          "flowpipe is flagged") {
    auto dyn = drift1(2.0);
    IntervalBox initial({0.0}, {0.4});
    SimConfig cfg;
    cfg.delta_c = 0.5;
    cfg.steps = 6;
    ControlFactory zero = [] {
        return [](const Vec&, int) { return 0.0; };
    };

    reach::ReachSet rs;
    for (int s = 1; s <= 6; ++s) {
        reach::ReachSegment seg;
        seg.step_index = s;
        // True span of step s is [s - 1, 0.4 + s].
        seg.box = IntervalBox({s - 1.0}, {0.4 + s});
        seg.endpoint_box = IntervalBox({s * 1.0}, {0.4 + s});
        rs.segments.push_back(seg);
    }
    ContainmentReport ok = containment_check(rs, initial, dyn, zero, cfg, 50);
    CHECK(ok.trajectories == 50);
    CHECK(ok.violations == 0);
    CHECK(ok.ok());

    reach::ReachSet tight = rs;
    tight.segments[3].box = IntervalBox({3.0}, {3.05});  // cuts off step 4
    ContainmentReport bad =
        containment_check(tight, initial, dyn, zero, cfg, 50);
    CHECK(bad.violations > 0);
    CHECK(bad.first_violation_step == 4);
    CHECK_FALSE(bad.ok());
}

TEST_CASE("trajectory CSV export") {
    Trajectory tr;
    tr.points.push_back({0, 6.0, {1.0, 2.0}, -0.5, "yield"});
    tr.points.push_back({1, 6.5, {1.5, 2.5}, 0.0, ""});
    std::string path = "sim_traj_test.csv";
    export_trajectory_csv(tr, path);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    CHECK(line == "step_index,t,planner_tag,u,x_1,x_2");
    std::getline(is, line);
    CHECK(line == "0,6,yield,-0.5,1,2");
    std::getline(is, line);
    CHECK(line == "1,6.5,,0,1.5,2.5");
    is.close();
    std::remove(path.c_str());
}

TEST_SUITE_END();
