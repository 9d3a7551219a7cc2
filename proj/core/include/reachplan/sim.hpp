#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reachplan/interval.hpp"
#include "reachplan/reach.hpp"

namespace reachplan::sim {

/// Deterministic low-discrepancy sequence value: radical inverse of i in
/// the given prime base, in [0, 1).
double halton(std::uint64_t index, int base);
/// Point inside the box from the first dim() prime-base Halton axes.
Vec halton_point(std::uint64_t index, const IntervalBox& box);

struct TrajectoryPoint {
    int step_index = 0;  // 0 for the initial state
    double t = 0.0;
    Vec state;
    double u = 0.0;       // control applied over the following step
    std::string tag;      // planner tag active over the following step
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    bool hit_unsafe = false;
    int unsafe_step = -1;  // step whose span contains the violation
};

/// Closed-loop control for a concrete state at a 1-based step; stateful
/// implementations (sticky behavior selection) are allowed.
using ControlFn = std::function<double(const Vec& x, int step_index)>;
/// Fresh, independent control instance per trajectory.
using ControlFactory = std::function<ControlFn()>;

struct SimConfig {
    double delta_c = 0.5;
    double t0 = 0.0;
    int steps = 20;
    int unsafe_samples_per_step = 4;  // intermediate unsafe checks per step
    std::function<std::string(int step_index)> tag_of;  // optional
};

/// Concrete closed-loop rollout under the same per-step closed form used by
/// the reachability step. Applies the dynamics' discrete reset at the start
/// of every step and checks the unsafe region (when given) at intermediate
/// points of each step.
Trajectory simulate(const reach::AffineStepDynamics& dyn, Vec x0,
                    const ControlFn& ctrl, const SimConfig& cfg,
                    const reach::UnsafeRegion* unsafe = nullptr);

struct FalsifyConfig {
    SimConfig sim;
    std::vector<int> schedule = {64, 256, 1024};  // samples per stage
    int workers = 1;
    std::uint64_t index_offset = 0;  // Halton start index (index 0 is skipped)
};

struct FalsifyResult {
    bool found = false;
    int samples_used = 0;
    Vec counterexample;               // initial state, when found
    std::optional<Trajectory> trace;  // violating trajectory, when found
};

/// Searches initial states on a Halton grid for a trajectory that enters
/// the unsafe region, growing the sample count stage by stage. Result is
/// deterministic and independent of the worker count: the lowest-index
/// counterexample of the first failing stage is returned.
FalsifyResult falsify(const IntervalBox& initial,
                      const reach::AffineStepDynamics& dyn,
                      const ControlFactory& make_ctrl,
                      const reach::UnsafeRegion& unsafe,
                      const FalsifyConfig& cfg);

struct ContainmentReport {
    int trajectories = 0;
    int violations = 0;       // trajectories leaving the flowpipe
    int first_violation_step = -1;
    bool ok() const { return violations == 0; }
};

/// Empirical soundness check: simulated trajectories from Halton-sampled
/// initial states must stay inside the union of same-step segment boxes.
ContainmentReport containment_check(const reach::ReachSet& rs,
                                    const IntervalBox& initial,
                                    const reach::AffineStepDynamics& dyn,
                                    const ControlFactory& make_ctrl,
                                    const SimConfig& cfg, int n_trajectories,
                                    double tol = 1e-7);

/// CSV export: step_index, t, planner_tag, u, x_1..x_n.
void export_trajectory_csv(const Trajectory& tr, const std::string& path);

}  // namespace reachplan::sim
