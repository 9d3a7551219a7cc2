#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reachplan/bernstein.hpp"
#include "reachplan/hierarchy.hpp"
#include "reachplan/reach.hpp"
#include "reachplan/scenario.hpp"

namespace reachplan::config {

struct ScenarioConfig {
    std::string name = "left_turn";     // left_turn | merging
    std::string initial_set = "fig6";   // fig5|fig6|fig7|fig9|custom
    std::optional<IntervalBox> custom_initial;
    bool use_schedule = false;  // left turn: apply the fig7 tau schedule
    scenario::LeftTurnParams left_turn;
    scenario::MergingParams merging;
    double delta_c = 0.5;
    int horizon_steps = 0;  // 0: per-scenario default
    std::optional<IntervalBox> sampling;
};

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 600;
    std::size_t batch_size = 64;
    int rollouts = 400;
    int rollout_horizon = 20;
    double mse_threshold = 1e-2;
};

struct PlannerConfig {
    std::string kind = "hierarchical";  // single | hierarchical
    std::string bundle;                 // bundle file (or weight file for single)
    std::optional<hierarchy::Trigger> trigger;  // overrides the bundle's trigger
    std::optional<std::vector<Interval>> regions;  // decision regions for training
};

struct FalsifyParams {
    std::vector<int> schedule = {100, 10000, 100000};
    int workers = 1;
};

struct RunConfig {
    ScenarioConfig scenario;
    PlannerConfig planner;
    TrainConfig train;
    reach::ReachConfig reach;
    bernstein::BernsteinConfig bernstein;
    FalsifyParams falsify;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    /// Initial set selected by scenario.initial_set.
    IntervalBox initial() const;
    /// Per-scenario horizon when horizon_steps is 0.
    int horizon() const;
};

/// Parses and validates a JSON run configuration. Missing fields take the
/// defaults above; reach.delta and reach timing defaults are filled in per
/// scenario. Throws std::runtime_error naming the offending field.
RunConfig load_run_config(const std::string& path);

/// Key/value sidecar describing a run; `timestamp` is always included and
/// is the only field allowed to differ between identical reruns.
void write_metadata(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace reachplan::config
