#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reachplan/interval.hpp"

namespace reachplan::reach {

/// One conjunct h(x) = normal . x + offset <= 0.
struct LinearConstraint {
    Vec normal;
    double offset = 0.0;
};

struct AffineStepDynamics;
struct FlowInfo;

/// Conjunction of linear constraints; a state is unsafe when every
/// constraint is satisfied.
class UnsafeRegion {
public:
    UnsafeRegion() = default;
    explicit UnsafeRegion(std::vector<LinearConstraint> cs);

    /// Box special case: dims not listed are unconstrained.
    static UnsafeRegion box(std::size_t dim,
                            const std::vector<std::pair<std::size_t, Interval>>& ranges);

    const std::vector<LinearConstraint>& constraints() const { return constraints_; }

    /// Sound check: true when every h_i attains <= 0 somewhere on the box.
    /// Exact for a single constraint and for box regions; conservative
    /// (errs toward "intersects") for general conjunctions.
    bool intersects(const IntervalBox& box) const;

    /// Sound check against the time-parameterized in-step flow. Evaluating
    /// each constraint along x(t) keeps same-time correlations between
    /// coordinates (e.g. a distance between two vehicles moving together)
    /// that the axis-aligned span hull discards. Conservative like
    /// intersects().
    bool intersects_flow(const FlowInfo& flow,
                         const AffineStepDynamics& dyn) const;

    bool contains(const Vec& x) const;

private:
    std::vector<LinearConstraint> constraints_;
};

/// Piecewise-constant-input affine dynamics xdot = A x + B u + c with
/// optional discrete resets applied at control step boundaries. A must be
/// nilpotent of index <= 2 (double-integrator structure), which gives exact
/// per-coordinate polynomial solutions.
struct AffineStepDynamics {
    std::vector<Vec> A;  // n x n
    Vec B;               // n (scalar input)
    Vec c;               // n
    /// Discrete reset applied at the start of every control step.
    std::function<void(IntervalBox&)> box_event;
    std::function<void(Vec&)> state_event;

    std::size_t dim() const { return c.size(); }
};

struct StepResult {
    IntervalBox span_hull;  // hull over t in [0, dt]
    IntervalBox endpoint;   // exact interval hull of states at t = dt
};

/// Exact endpoint hull and sound span hull for one control step under a
/// constant input drawn from u_range. Throws for non-nilpotent A.
StepResult step_affine(const AffineStepDynamics& dyn, const IntervalBox& box,
                       const Interval& u_range, double dt);

/// Closed-form state after time dt from a concrete state and input.
Vec step_exact(const AffineStepDynamics& dyn, const Vec& x, double u, double dt);

/// State-feedback control enclosure u(x) in g . x + h +- w, constant over
/// one control step.
struct AffineControl {
    Vec g;
    double h = 0.0;
    double w = 0.0;
};

/// Everything needed to reconstruct the in-step trajectory family of one
/// flowpipe segment: the box at the step start (after any reset event) and
/// the control enclosure held constant over the step.
struct FlowInfo {
    IntervalBox start;
    AffineControl ctrl;
    double dt = 0.0;
};

/// One control step under a state-feedback control enclosure. Composing the
/// control law with the dynamics keeps per-coordinate feedback (e.g. speed
/// tracking) contractive instead of treating the input as an unknown
/// constant from its range; the endpoint per coordinate is the exact
/// interval hull of an affine function over the box, widened by the control
/// slack w. The span hull is the endpoint/start hull widened by the maximum
/// quadratic sag of the in-step trajectory.
StepResult step_affine_feedback(const AffineStepDynamics& dyn,
                                const IntervalBox& box,
                                const AffineControl& ctrl, double dt);

/// Axis-aligned grid of cells with width <= delta_j per dimension whose
/// union is exactly the box. Zero-width dimensions are not split.
std::vector<IntervalBox> partition(const IntervalBox& box, const Vec& delta);
std::vector<IntervalBox> partition(const IntervalBox& box, double delta);

// ---------------------------------------------------------------------------

enum class Verdict { Safe, Uncertain, InProgress };
std::string to_string(Verdict v);

/// Flowpipe atom: hull of system states over one control interval.
struct ReachSegment {
    int step_index = 0;     // 1-based; spans [t0+(i-1)*dc, t0+i*dc]
    double t_lo = 0.0;
    double t_hi = 0.0;
    IntervalBox box;           // hull over the span
    IntervalBox endpoint_box;  // states at the end of the span
    std::string planner_tag;
    /// In-step flow description, when the stepper provides one; enables the
    /// correlation-preserving unsafe check.
    std::optional<FlowInfo> flow;
};

struct ReachSet {
    std::vector<ReachSegment> segments;
    Verdict verdict = Verdict::InProgress;
    std::string reason;

    std::vector<ReachSegment> at_step(int step_index) const;
    int max_step() const;
};

struct TaggedBox {
    IntervalBox box;
    std::string tag;
};

/// One child produced by a closed-loop step: a stepped box plus the epsilon
/// certified for the control enclosure that produced it.
struct StepChild {
    IntervalBox span_hull;
    IntervalBox endpoint;
    std::string tag;
    double epsilon = 0.0;
    std::optional<FlowInfo> flow;
};

struct StepOutcome {
    std::vector<StepChild> children;
    std::optional<std::string> abort;  // abort reason, when set
};

/// Closed-loop stepper: planner evaluation plus step_affine, including any
/// behavior forking. step_index is the 1-based index of the step being taken.
using Stepper =
    std::function<StepOutcome(const IntervalBox& box, const std::string& tag,
                              int step_index)>;

struct ReachConfig {
    Vec delta;                       // partition widths per dim
    int steps_per_round = 5;         // n in Reach_Comp(I_gamma, n)
    double delta_c = 0.5;            // control step, seconds
    double t0 = 0.0;                 // time at step 0
    double growth_gate = 4.0;        // per-step width growth factor cap
    double growth_floor = 1e-3;      // width floor for the growth ratio
    double epsilon_cap = 0.5;        // abort when a certified eps exceeds this
    double cell_time_budget_s = 5.0; // wall clock per reach_comp call
    int max_refine_depth = 4;
    int max_steps = 200;
    std::string initial_tag;         // empty: stepper assigns at first trigger
};

struct ReachCompResult {
    bool ok = false;
    std::string abort_reason;
    std::string abort_detail;  // which gate tripped, for the event log
    std::vector<ReachSegment> segments;
    std::vector<TaggedBox> frontier;  // endpoint boxes after the last step
};

/// Propagates one cell for n steps. Aborts (ok = false) when a quality gate
/// fails: growth factor, epsilon cap, or time budget.
ReachCompResult reach_comp(const TaggedBox& cell, int start_step, int n,
                           const Stepper& stepper, const ReachConfig& cfg);

struct RunMetadata {
    int refinement_events = 0;
    int steps_completed = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> events;
};

/// Partition-and-union reachable set computation. Partitions the frontier,
/// propagates each cell, halves the grid on aborted cells up to
/// max_refine_depth, and unions endpoint boxes into the next frontier.
/// When dyn is given, segments carrying flow info are checked against the
/// unsafe region along the in-step flow instead of the span hull.
ReachSet algorithm1(const IntervalBox& initial, const UnsafeRegion& unsafe,
                    const IntervalBox& goal, const Stepper& stepper,
                    const ReachConfig& cfg, RunMetadata* meta = nullptr,
                    const AffineStepDynamics* dyn = nullptr);

/// Projects the step's segment boxes onto one dimension and merges
/// overlapping intervals; returns maximal disjoint intervals sorted by lo.
std::vector<Interval> branch_clusters(const ReachSet& rs, int step_index,
                                      std::size_t dim);

/// Gaps between consecutive clusters (empty when fewer than 2 clusters).
std::vector<double> cluster_gaps(const std::vector<Interval>& clusters);

/// 1-D point clustering: sorted values split at gaps greater than gap_tol.
std::vector<Interval> cluster_points(Vec values, double gap_tol);

/// CSV export: step_index, t_lo, t_hi, planner_tag, lo_1..lo_n, hi_1..hi_n.
void export_csv(const ReachSet& rs, const std::string& path);

}  // namespace reachplan::reach
