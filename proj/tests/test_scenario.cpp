#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "reachplan/scenario.hpp"

using namespace reachplan;
using namespace reachplan::scenario;

TEST_SUITE_BEGIN("scenario");

TEST_CASE("left turn: initial sets and behavior ordering") {
    auto f5 = LeftTurnScenario::initial_fig5();
    CHECK(f5.lo(LT_P1) == -60.4);
    CHECK(f5.hi(LT_P1) == -60.3);
    CHECK(f5.lo(LT_TMIN) == 14.0);
    CHECK(f5.hi(LT_TMAX) == 16.0);
    CHECK(f5.lo(LT_T) == 6.0);
    auto f6 = LeftTurnScenario::initial_fig6();
    CHECK(f6.lo(LT_P1) == -64.35);
    CHECK(f6.hi(LT_P1) == -64.05);
    auto f7 = LeftTurnScenario::initial_fig7();
    CHECK(f7.lo(LT_TMIN) == 13.0);
    CHECK(f7.hi(LT_TMAX) == 21.0);
    const auto& labels = LeftTurnScenario::behavior_labels();
    REQUIRE(labels.size() == 3);
    CHECK(labels[LeftTurnScenario::kYield] == "yield");
    CHECK(labels[LeftTurnScenario::kStop] == "stop");
    CHECK(labels[LeftTurnScenario::kProceed] == "proceed");
}

TEST_CASE("left turn dynamics: closed-form step and clock drift") {
    LeftTurnScenario sc;
    auto dyn = sc.dynamics();
    Vec x = reach::step_exact(dyn, {-60.0, 10.0, 14.0, 16.0, 6.0}, 1.0, 0.5);
    CHECK(x[LT_P1] == doctest::Approx(-60.0 + 10.0 * 0.5 + 0.5 * 0.25));
    CHECK(x[LT_V1] == doctest::Approx(10.5));
    CHECK(x[LT_TMIN] == 14.0);
    CHECK(x[LT_TMAX] == 16.0);
    CHECK(x[LT_T] == doctest::Approx(6.5));
    CHECK_FALSE(dyn.box_event);  // no schedule, no reset
}

TEST_CASE("fig7 schedule: tau jumps at the published times, window never "
          "widens") {
    auto sched = LeftTurnScenario::schedule_fig7();
    REQUIRE(sched.size() == 5);
    CHECK(sched[0].time == 6.0);
    CHECK(sched[0].tau_min == 13.0);
    CHECK(sched[4].time == 10.0);
    CHECK(sched[4].tau_min == 20.0);
    for (std::size_t i = 1; i < sched.size(); ++i) {
        CHECK(sched[i].time > sched[i - 1].time);
        CHECK(sched[i].tau_min >= sched[i - 1].tau_min);  // lower edge rises
        CHECK(sched[i].tau_max <= sched[i - 1].tau_max);  // upper edge holds
    }

    LeftTurnScenario sc;
    sc.schedule = sched;
    auto dyn = sc.dynamics();
    REQUIRE(dyn.state_event);
    Vec x = {-50.0, 10.0, 13.0, 21.0, 7.2};
    dyn.state_event(x);
    CHECK(x[LT_TMIN] == 15.0);  // events at 6 and 7 both applied, last wins
    CHECK(x[LT_TMAX] == 21.0);
    x[LT_T] = 10.5;
    dyn.state_event(x);
    CHECK(x[LT_TMIN] == 20.0);

    REQUIRE(dyn.box_event);
    IntervalBox b({-50.0, 10.0, 13.0, 21.0, 9.0}, {-49.0, 10.5, 13.0, 21.0, 9.4});
    dyn.box_event(b);
    CHECK(b.lo(LT_TMIN) == 19.0);
    CHECK(b.hi(LT_TMIN) == 19.0);
    CHECK(b.lo(LT_TMAX) == 21.0);
}

TEST_CASE("left turn unsafe sets") {
    auto fixed = LeftTurnScenario::unsafe_fixed(14.0, 16.0);
    CHECK(fixed.contains({10.0, 0.0, 14.0, 16.0, 15.0}));
    CHECK_FALSE(fixed.contains({10.0, 0.0, 14.0, 16.0, 17.0}));
    CHECK_FALSE(fixed.contains({2.0, 0.0, 14.0, 16.0, 15.0}));

    auto coupled = LeftTurnScenario::unsafe_window();
    CHECK(coupled.contains({10.0, 0.0, 14.0, 16.0, 15.0}));
    CHECK_FALSE(coupled.contains({10.0, 0.0, 14.0, 16.0, 17.0}));
    // The window travels with the state: same t, later window.
    CHECK_FALSE(coupled.contains({10.0, 0.0, 17.0, 19.0, 15.0}));
    CHECK(coupled.contains({10.0, 0.0, 17.0, 19.0, 18.0}));

    IntervalBox in_window({5.0, 10.0, 14.0, 16.0, 14.5},
                          {6.0, 10.5, 14.0, 16.0, 15.0});
    CHECK(coupled.intersects(in_window));
    IntervalBox before({5.0, 10.0, 15.0, 16.0, 14.0},
                       {6.0, 10.5, 15.0, 16.0, 14.5});
    CHECK_FALSE(coupled.intersects(before));
}

TEST_CASE("left turn: normalization, goal, sampling boxes") {
    LeftTurnScenario sc;
    auto nb = sc.normalization_bounds();
    CHECK(nb.lo(LT_P1) == -90.0);
    CHECK(nb.hi(LT_P1) == 90.0);
    CHECK(nb.lo(LT_V1) == -2.0);
    CHECK(nb.hi(LT_T) == 24.0);
    CHECK(nb.contains(LeftTurnScenario::initial_fig6()));
    CHECK(nb.contains(sc.default_sampling()));

    auto goal = LeftTurnScenario::goal_after(16.0);
    CHECK(goal.contains(IntervalBox({0.0, 0.0, 14.0, 16.0, 16.5},
                                    {1.0, 1.0, 14.0, 16.0, 17.0})));
    CHECK_FALSE(goal.contains(IntervalBox({0.0, 0.0, 14.0, 16.0, 15.0},
                                          {1.0, 1.0, 14.0, 16.0, 16.5})));
}

TEST_CASE("left turn expert: branch selection and control law") {
    LeftTurnScenario sc;  // default params, proceed_margin 1.31
    const auto& P = sc.params;

    SUBCASE("inside the conflict zone: always clear it") {
        auto [label, u] = sc.expert({5.0, 10.0, 14.0, 16.0, 15.0});
        CHECK(label == LeftTurnScenario::kProceed);
        CHECK(u == doctest::Approx(P.k_v * (P.v_cap - 10.0)));
    }
    SUBCASE("fast approach clears before the window: proceed") {
        auto [label, u] = sc.expert({-60.35, 10.505, 14.0, 16.0, 6.0});
        CHECK(label == LeftTurnScenario::kProceed);
        CHECK(u == doctest::Approx(P.k_v * (P.v_cap - 10.505)));
    }
    SUBCASE("slow approach that can enter after the window: yield") {
        auto [label, u] = sc.expert({-70.0, 8.0, 14.0, 16.0, 6.0});
        CHECK(label == LeftTurnScenario::kYield);
        // Constant acceleration reaching the entry line at te = 16.5.
        double T = 16.5 - 6.0;
        CHECK(u == doctest::Approx(2.0 * (74.5 - 8.0 * T) / (T * T)));
        CHECK(u < 0.0);
        CHECK(u >= P.actuator.lo);
    }
    SUBCASE("no entry before red: stop without reversing") {
        auto [label, u] = sc.expert({-20.0, 2.0, 14.0, 16.0, 12.0});
        CHECK(label == LeftTurnScenario::kStop);
        CHECK(u == doctest::Approx(P.a_stop));
        // Braking never drives the speed negative.
        CHECK(2.0 + u * sc.delta_c >= 0.0);
    }
    SUBCASE("window already passed: proceed through green") {
        auto [label, u] = sc.expert({-20.0, 10.0, 14.0, 16.0, 17.0});
        CHECK(label == LeftTurnScenario::kProceed);
        CHECK(u == doctest::Approx(P.k_v * (P.v_cap - 10.0)));
    }
}

TEST_CASE("merging: initial set, labels, dynamics") {
    auto f9 = MergingScenario::initial_fig9();
    CHECK(f9.lo(MG_P1) == 0.0);
    CHECK(f9.hi(MG_P1) == 0.0);
    CHECK(f9.lo(MG_V1) == 25.0);
    CHECK(f9.lo(MG_P2) == -24.5);
    CHECK(f9.hi(MG_P2) == -23.5);
    CHECK(f9.lo(MG_V2) == 24.5);
    CHECK(f9.hi(MG_V2) == 25.5);
    const auto& labels = MergingScenario::behavior_labels();
    REQUIRE(labels.size() == 2);
    CHECK(labels[MergingScenario::kYield] == "yield");
    CHECK(labels[MergingScenario::kProceed] == "proceed");

    MergingScenario sc;
    Vec x = reach::step_exact(sc.dynamics(), {0.0, 25.0, -24.0, 24.5}, -2.0, 0.5);
    CHECK(x[MG_P1] == doctest::Approx(25.0 * 0.5 - 0.25));
    CHECK(x[MG_V1] == doctest::Approx(24.0));
    CHECK(x[MG_P2] == doctest::Approx(-24.0 + 24.5 * 0.5));  // C2 unactuated
    CHECK(x[MG_V2] == doctest::Approx(24.5));
}

TEST_CASE("merging expert: projected-gap decision and speed floor") {
    MergingScenario sc;
    const auto& P = sc.params;

    SUBCASE("wide projected gap: proceed at cruise") {
        auto [label, u] = sc.expert({0.0, 25.0, -24.0, 24.5});
        CHECK(label == MergingScenario::kProceed);
        CHECK(u == doctest::Approx(0.0));  // already at v_cruise
    }
    SUBCASE("closing gap: yield with maximum braking") {
        auto [label, u] = sc.expert({0.0, 25.0, -20.0, 25.5});
        CHECK(label == MergingScenario::kYield);
        CHECK(u == doctest::Approx(P.actuator.lo));
    }
    SUBCASE("speed floor overrides the brake") {
        auto [label, u] = sc.expert({0.0, 3.4, -20.0, 25.5});
        CHECK(label == MergingScenario::kYield);
        CHECK(u == doctest::Approx((P.v_floor - 3.4) / sc.delta_c));
        CHECK(3.4 + u * sc.delta_c == doctest::Approx(P.v_floor));
    }
    SUBCASE("decision is invariant along constant-speed proceed rollouts") {
        Vec x = {0.0, 25.0, -24.0, 24.5};
        auto dyn = sc.dynamics();
        for (int s = 0; s < 20; ++s) {
            auto [label, u] = sc.expert(x);
            REQUIRE(label == MergingScenario::kProceed);
            x = reach::step_exact(dyn, x, u, sc.delta_c);
        }
    }
}

TEST_CASE("merging expert rollouts keep the merge-region gap open") {
    MergingScenario sc;
    auto dyn = sc.dynamics();
    auto band = merging_band(sc.params.d_th, {80.0, 110.0});
    IntervalBox init = MergingScenario::initial_fig9();
    // Corner sweep plus midpoints of the fig9 initial set.
    for (double p2 : {-24.5, -24.0, -23.5}) {
        for (double v2 : {24.5, 25.0, 25.5}) {
            Vec x = {0.0, 25.0, p2, v2};
            for (int s = 0; s < 40; ++s) {
                auto [label, u] = sc.expert(x);
                x = reach::step_exact(dyn, x, u, sc.delta_c);
                CHECK_FALSE(band.contains(x));
            }
        }
    }
}

TEST_CASE("merging band region geometry") {
    auto band = merging_band(19.75, {40.0, 60.0});
    CHECK(band.contains({50.0, 25.0, 40.0, 25.0}));   // gap 10, p1 in window
    CHECK(band.contains({50.0, 25.0, 69.0, 25.0}));   // C2 ahead, gap 19
    CHECK_FALSE(band.contains({50.0, 25.0, 20.0, 25.0}));  // gap 30
    CHECK_FALSE(band.contains({70.0, 25.0, 60.0, 25.0}));  // outside window
}

TEST_CASE("merging_unsafe_window on synthetic reach sets") {
    SUBCASE("empty reach set: the whole road is clear") {
        reach::ReachSet rs;
        auto w = merging_unsafe_window(rs, 19.75, 150.0, 1.0);
        REQUIRE(w.has_value());
        CHECK(w->lo == 0.0);
        CHECK(w->hi == 150.0);
    }
    SUBCASE("one occupied stretch splits the road; the longer run wins") {
        reach::ReachSet rs;
        reach::ReachSegment seg;
        seg.step_index = 1;
        seg.box = IntervalBox({50.0, 24.0, 45.0, 24.0}, {60.0, 25.0, 55.0, 25.0});
        seg.endpoint_box = seg.box;
        rs.segments.push_back(seg);
        auto w = merging_unsafe_window(rs, 19.75, 150.0, 1.0);
        REQUIRE(w.has_value());
        CHECK(w->lo == doctest::Approx(61.0));
        CHECK(w->hi == doctest::Approx(150.0));
    }
    SUBCASE("band occupied everywhere: no window") {
        reach::ReachSet rs;
        reach::ReachSegment seg;
        seg.step_index = 1;
        seg.box = IntervalBox({0.0, 24.0, 0.0, 24.0}, {150.0, 25.0, 150.0, 25.0});
        seg.endpoint_box = seg.box;
        rs.segments.push_back(seg);
        CHECK_FALSE(merging_unsafe_window(rs, 19.75, 150.0, 1.0).has_value());
    }
    SUBCASE("degenerate road length") {
        reach::ReachSet rs;
        CHECK_FALSE(merging_unsafe_window(rs, 19.75, 0.5, 1.0).has_value());
    }
}

TEST_CASE("dataset generation: shape, fixup, determinism") {
    LeftTurnScenario sc;
    RolloutConfig cfg;
    cfg.sampling = sc.default_sampling();
    cfg.rollouts = 200;
    cfg.horizon_steps = 10;
    cfg.seed = 7;
    auto data = generate_dataset(sc, cfg);
    CHECK(data.size() == 2000);
    for (const auto& s : data) {
        CHECK(s.state.size() == 5);
        CHECK(s.state[LT_TMAX] >= s.state[LT_TMIN] + 1.0 - 1e-9);
        CHECK(s.u >= sc.params.actuator.lo - 1e-12);
        CHECK(s.u <= sc.params.actuator.hi + 1e-12);
    }
    auto hist = label_histogram(data, 3);
    CHECK(hist[0] + hist[1] + hist[2] == data.size());
    // The sampling box exercises all three behaviors.
    CHECK(hist[LeftTurnScenario::kYield] > 0);
    CHECK(hist[LeftTurnScenario::kStop] > 0);
    CHECK(hist[LeftTurnScenario::kProceed] > 0);

    auto again = generate_dataset(sc, cfg);
    REQUIRE(again.size() == data.size());
    bool identical = true;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (again[i].state != data[i].state || again[i].u != data[i].u ||
            again[i].label != data[i].label)
            identical = false;
    CHECK(identical);

    cfg.seed = 8;
    auto other = generate_dataset(sc, cfg);
    bool differs = false;
    for (std::size_t i = 0; i < data.size() && !differs; ++i)
        if (other[i].state != data[i].state) differs = true;
    CHECK(differs);

    RolloutConfig bad = cfg;
    bad.rollouts = 0;
    CHECK_THROWS(generate_dataset(sc, bad));
}

TEST_CASE("merging dataset covers both behaviors") {
    MergingScenario sc;
    RolloutConfig cfg;
    cfg.sampling = sc.default_sampling();
    cfg.rollouts = 100;
    cfg.horizon_steps = 8;
    auto data = generate_dataset(sc, cfg);
    CHECK(data.size() == 800);
    auto hist = label_histogram(data, 2);
    CHECK(hist[MergingScenario::kYield] > 0);
    CHECK(hist[MergingScenario::kProceed] > 0);
}

TEST_CASE("dataset CSV export") {
    std::vector<Sample> data = {{{1.0, 2.0}, 1, -0.5}, {{3.0, 4.0}, 0, 2.25}};
    std::string path = "scenario_dataset_test.csv";
    export_dataset_csv(data, path);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    CHECK(line == "x_1,x_2,label,u");
    std::getline(is, line);
    CHECK(line == "1,2,1,-0.5");
    std::getline(is, line);
    CHECK(line == "3,4,0,2.25");
    is.close();
    std::remove(path.c_str());
}

TEST_SUITE_END();
