#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reachplan/interval.hpp"
#include "reachplan/reach.hpp"

namespace reachplan::scenario {

// Left-turn state layout: (p1, v1, tau_min, tau_max, t).
inline constexpr std::size_t LT_P1 = 0, LT_V1 = 1, LT_TMIN = 2, LT_TMAX = 3,
                             LT_T = 4;
// Merging state layout: (p1, v1, p2, v2).
inline constexpr std::size_t MG_P1 = 0, MG_V1 = 1, MG_P2 = 2, MG_V2 = 3;

/// Fixed signal pattern: green, then yellow, then red.
struct SignalPattern {
    double green_s = 20.0;
    double yellow_s = 3.0;
    double red_s = 20.0;
    double red_start() const { return green_s + yellow_s; }
};

/// Discrete time-window update applied when t crosses `time`.
struct TauEvent {
    double time;
    double tau_min;
    double tau_max;
};

/// Expert-policy and physics knobs for the left-turn system. The margins
/// shape where the proceed/yield/stop boundaries fall in state space.
struct LeftTurnParams {
    Interval actuator{-4.0, 3.0};
    double zone_entry = 4.5;
    double zone_exit = 14.0;
    double a_proceed = 1.2;      // comfortable acceleration for feasibility checks
    double v_cap = 11.8;         // speed cap for feasibility checks and tracking
    double k_v = 1.5;            // proportional speed-tracking gain
    double proceed_margin = 1.31; // clear the zone this long before tau_min
    double yield_margin = 0.5;   // enter the zone this long after tau_max
    double red_margin = 0.5;     // enter the zone this long before the red phase
    double a_stop = -2.0;
    SignalPattern signal;
};

class LeftTurnScenario {
public:
    LeftTurnParams params;
    std::vector<TauEvent> schedule;  // empty: fixed window
    double delta_c = 0.5;
    double t0 = 6.0;

    static IntervalBox initial_fig5();
    static IntervalBox initial_fig6();
    static IntervalBox initial_fig7();
    static std::vector<TauEvent> schedule_fig7();

    /// Behavior ordering along the decision axis. Stop sits between yield
    /// and proceed so that an enclosure straddling the proceed/yield
    /// transition touches all three regions.
    static const std::vector<std::string>& behavior_labels();
    static constexpr std::size_t kYield = 0, kStop = 1, kProceed = 2;

    reach::AffineStepDynamics dynamics() const;
    static reach::UnsafeRegion unsafe_fixed(double tau_min, double tau_max);
    /// State-coupled variant: unsafe when t lies inside the current
    /// (tau_min, tau_max) state dimensions; tracks schedule updates.
    static reach::UnsafeRegion unsafe_window();

    IntervalBox normalization_bounds() const;
    /// Goal set for horizon-bounded verification: t >= t_goal.
    static IntervalBox goal_after(double t_goal);

    /// Scripted expert: behavior index (see behavior_labels) and control.
    std::pair<std::size_t, double> expert(const Vec& x) const;

    IntervalBox default_sampling() const;
};

struct MergingParams {
    Interval actuator{-4.0, 3.0};
    double d_th = 19.75;
    double p_end = 150.0;
    double window_center = 95.0;  // projection point for the merge decision
    double gap_margin = 3.0;      // extra projected gap required to proceed
    double brake_offset = 6.0;    // yield settles at d_th + brake_offset behind
    double k_gap = 2.0;           // gap-deficit to speed-target gain
    double k_v = 1.5;
    double v_cruise = 25.0;
    double v_floor = 3.0;
};

class MergingScenario {
public:
    MergingParams params;
    double delta_c = 0.5;
    double t0 = 0.0;

    static IntervalBox initial_fig9();
    static const std::vector<std::string>& behavior_labels();  // yield, proceed
    static constexpr std::size_t kYield = 0, kProceed = 1;

    reach::AffineStepDynamics dynamics() const;
    IntervalBox normalization_bounds() const;
    /// Goal: C1 past the merge region, p1 >= p_goal.
    static IntervalBox goal_after(double p_goal);

    std::pair<std::size_t, double> expert(const Vec& x) const;

    IntervalBox default_sampling() const;
};

/// Unsafe band |p1 - p2| <= d_th restricted to a p1 window, as conjunctive
/// linear constraints over the merging state.
reach::UnsafeRegion merging_band(double d_th, const Interval& p1_window);

/// Scans p1 windows on a 1 m grid of endpoints inside [0, p_end] and
/// returns the widest window whose band region is disjoint from the reach
/// set, or nothing if no grid cell is clear. When dyn is given, segments
/// carrying flow info are tested along the in-step flow, which keeps the
/// same-time correlation between the two vehicles' positions.
std::optional<Interval> merging_unsafe_window(
    const reach::ReachSet& rs, double d_th, double p_end, double grid = 1.0,
    const reach::AffineStepDynamics* dyn = nullptr);

// ---------------------------------------------------------------------------
// Expert dataset generation

struct Sample {
    Vec state;
    std::size_t label;
    double u;
};

struct RolloutConfig {
    IntervalBox sampling;  // initial-state sampling ranges
    int rollouts = 400;
    int horizon_steps = 20;
    std::uint64_t seed = 1;
};

std::vector<Sample> generate_dataset(const LeftTurnScenario& sc,
                                     const RolloutConfig& cfg);
std::vector<Sample> generate_dataset(const MergingScenario& sc,
                                     const RolloutConfig& cfg);

std::vector<std::size_t> label_histogram(const std::vector<Sample>& data,
                                         std::size_t n_labels);

void export_dataset_csv(const std::vector<Sample>& data, const std::string& path);

}  // namespace reachplan::scenario
