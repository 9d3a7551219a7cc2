#include "reachplan/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace reachplan::scenario {

namespace {

constexpr double kFree = 1e30;  // stand-in for an unconstrained bound

double clamp_u(double u, const Interval& actuator) {
    return std::clamp(u, actuator.lo, actuator.hi);
}

/// Time to cover distance D starting at speed v, accelerating at a up to
/// vmax, then cruising. Used for feasibility estimates in the expert.
double time_to_cover(double D, double v, double a, double vmax) {
    if (D <= 0.0) return 0.0;
    v = std::max(v, 0.0);
    if (v >= vmax) return D / v;
    double t1 = (vmax - v) / a;
    double d1 = v * t1 + 0.5 * a * t1 * t1;
    if (d1 >= D) return (std::sqrt(v * v + 2.0 * a * D) - v) / a;
    return t1 + (D - d1) / vmax;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Left turn

IntervalBox LeftTurnScenario::initial_fig5() {
    return {{-60.4, 10.5, 14.0, 16.0, 6.0}, {-60.3, 10.51, 14.0, 16.0, 6.0}};
}

IntervalBox LeftTurnScenario::initial_fig6() {
    return {{-64.35, 10.5, 14.0, 16.0, 6.0}, {-64.05, 10.51, 14.0, 16.0, 6.0}};
}

IntervalBox LeftTurnScenario::initial_fig7() {
    return {{-60.0, 10.5, 13.0, 21.0, 6.0}, {-59.7, 10.51, 13.0, 21.0, 6.0}};
}

std::vector<TauEvent> LeftTurnScenario::schedule_fig7() {
    return {{6.0, 13.0, 21.0},
            {7.0, 15.0, 21.0},
            {8.0, 17.0, 21.0},
            {9.0, 19.0, 21.0},
            {10.0, 20.0, 21.0}};
}

const std::vector<std::string>& LeftTurnScenario::behavior_labels() {
    static const std::vector<std::string> labels = {"yield", "stop", "proceed"};
    return labels;
}

reach::AffineStepDynamics LeftTurnScenario::dynamics() const {
    reach::AffineStepDynamics d;
    d.A.assign(5, Vec(5, 0.0));
    d.A[LT_P1][LT_V1] = 1.0;
    d.B = {0.0, 1.0, 0.0, 0.0, 0.0};
    d.c = {0.0, 0.0, 0.0, 0.0, 1.0};
    if (!schedule.empty()) {
        auto sched = schedule;
        d.box_event = [sched](IntervalBox& b) {
            double t = b.lo(LT_T);
            for (const auto& e : sched) {
                if (t >= e.time - 1e-9) {
                    b.set(LT_TMIN, Interval::point(e.tau_min));
                    b.set(LT_TMAX, Interval::point(e.tau_max));
                }
            }
        };
        d.state_event = [sched](Vec& x) {
            for (const auto& e : sched) {
                if (x[LT_T] >= e.time - 1e-9) {
                    x[LT_TMIN] = e.tau_min;
                    x[LT_TMAX] = e.tau_max;
                }
            }
        };
    }
    return d;
}

reach::UnsafeRegion LeftTurnScenario::unsafe_fixed(double tau_min,
                                                   double tau_max) {
    return reach::UnsafeRegion::box(
        5, {{LT_P1, {4.5, 14.0}}, {LT_T, {tau_min, tau_max}}});
}

reach::UnsafeRegion LeftTurnScenario::unsafe_window() {
    std::vector<reach::LinearConstraint> cs;
    cs.push_back({{-1.0, 0.0, 0.0, 0.0, 0.0}, 4.5});   // 4.5 - p1 <= 0
    cs.push_back({{1.0, 0.0, 0.0, 0.0, 0.0}, -14.0});  // p1 - 14 <= 0
    cs.push_back({{0.0, 0.0, 1.0, 0.0, -1.0}, 0.0});   // tau_min - t <= 0
    cs.push_back({{0.0, 0.0, 0.0, -1.0, 1.0}, 0.0});   // t - tau_max <= 0
    return reach::UnsafeRegion(std::move(cs));
}

IntervalBox LeftTurnScenario::normalization_bounds() const {
    return {{-90.0, -2.0, 12.0, 12.0, 5.0}, {90.0, 15.0, 26.0, 26.0, 24.0}};
}

IntervalBox LeftTurnScenario::goal_after(double t_goal) {
    return {{-kFree, -kFree, -kFree, -kFree, t_goal},
            {kFree, kFree, kFree, kFree, kFree}};
}

IntervalBox LeftTurnScenario::default_sampling() const {
    return {{-80.0, 8.5, 13.0, 15.0, 6.0}, {-45.0, 12.5, 20.0, 25.0, 12.0}};
}

std::pair<std::size_t, double> LeftTurnScenario::expert(const Vec& x) const {
    const auto& P = params;
    double p = x[LT_P1], v = x[LT_V1];
    double tau_min = x[LT_TMIN], tau_max = x[LT_TMAX], t = x[LT_T];
    double red = P.signal.red_start();

    auto track_cap = [&] { return clamp_u(P.k_v * (P.v_cap - v), P.actuator); };

    // Already inside or past the conflict zone: clear it.
    if (p >= P.zone_entry) return {kProceed, track_cap()};

    double t_exit = t + time_to_cover(P.zone_exit - p, v, P.a_proceed, P.v_cap);
    double t_entry = t + time_to_cover(P.zone_entry - p, v, P.a_proceed, P.v_cap);

    // Window already passed: proceed if the zone can be entered in green.
    if (t >= tau_max && t_entry <= red - P.red_margin)
        return {kProceed, track_cap()};

    // Proceed: able to clear the zone comfortably before the window opens
    // (and, trivially then, enter before the red phase).
    if (t_exit <= tau_min - P.proceed_margin && t_entry <= red - P.red_margin)
        return {kProceed, track_cap()};

    // Yield: able to enter after the window closes but before the red phase.
    double te = std::max(tau_max + P.yield_margin,
                         t + (P.zone_entry - p) / std::max(v, 0.5));
    if (std::max(te, t_entry) <= red - P.red_margin) {
        double T = te - t;
        double u;
        if (T <= 0.25) {
            u = P.k_v * (P.v_cap - v);
        } else {
            // Constant acceleration reaching the entry line at time te.
            u = 2.0 * ((P.zone_entry - p) - v * T) / (T * T);
            if (v + clamp_u(u, P.actuator) * delta_c < 0.3)
                u = (0.3 - v) / delta_c;  // keep rolling
        }
        return {kYield, clamp_u(u, P.actuator)};
    }

    // Stop: brake to rest without reversing.
    double u = std::max(P.a_stop, -v / delta_c);
    return {kStop, clamp_u(u, P.actuator)};
}

// ---------------------------------------------------------------------------
// Merging

IntervalBox MergingScenario::initial_fig9() {
    return {{0.0, 25.0, -24.5, 24.5}, {0.0, 25.0, -23.5, 25.5}};
}

const std::vector<std::string>& MergingScenario::behavior_labels() {
    static const std::vector<std::string> labels = {"yield", "proceed"};
    return labels;
}

reach::AffineStepDynamics MergingScenario::dynamics() const {
    reach::AffineStepDynamics d;
    d.A.assign(4, Vec(4, 0.0));
    d.A[MG_P1][MG_V1] = 1.0;
    d.A[MG_P2][MG_V2] = 1.0;
    d.B = {0.0, 1.0, 0.0, 0.0};
    d.c = {0.0, 0.0, 0.0, 0.0};
    return d;
}

IntervalBox MergingScenario::normalization_bounds() const {
    return {{-5.0, 0.0, -35.0, 20.0}, {250.0, 30.0, 260.0, 30.0}};
}

IntervalBox MergingScenario::goal_after(double p_goal) {
    return {{p_goal, -kFree, -kFree, -kFree}, {kFree, kFree, kFree, kFree}};
}

IntervalBox MergingScenario::default_sampling() const {
    return {{0.0, 23.0, -30.0, 23.5}, {2.0, 27.0, -18.0, 26.5}};
}

std::pair<std::size_t, double> MergingScenario::expert(const Vec& x) const {
    const auto& P = params;
    double p1 = x[MG_P1], v1 = x[MG_V1], p2 = x[MG_P2], v2 = x[MG_V2];

    // Signed gap (C1 ahead positive) projected to when C1 reaches the
    // middle of the merge region under constant speeds. Constant along
    // constant-speed trajectories, so the decision does not flip mid-run.
    double tc = (P.window_center - p1) / std::max(v1, 1.0);
    double gap_proj = (p1 - p2) + (v1 - v2) * tc;

    if (gap_proj >= P.d_th + P.gap_margin) {
        double u = P.k_v * (P.v_cruise - v1);
        return {kProceed, clamp_u(u, P.actuator)};
    }

    // Yield: track a speed that closes the gap deficit behind C2, then
    // matches C2 once the target gap d_th + brake_offset is reached.
    double deficit = (P.d_th + P.brake_offset) - (p2 - p1);
    double v_target = v2 - P.k_gap * std::max(deficit, 0.0);
    double u = P.k_v * (v_target - v1);
    if (v1 + clamp_u(u, P.actuator) * delta_c < P.v_floor)
        u = (P.v_floor - v1) / delta_c;
    return {kYield, clamp_u(u, P.actuator)};
}

reach::UnsafeRegion merging_band(double d_th, const Interval& p1_window) {
    std::vector<reach::LinearConstraint> cs;
    cs.push_back({{1.0, 0.0, -1.0, 0.0}, -d_th});       // p1 - p2 - d_th <= 0
    cs.push_back({{-1.0, 0.0, 1.0, 0.0}, -d_th});       // p2 - p1 - d_th <= 0
    cs.push_back({{-1.0, 0.0, 0.0, 0.0}, p1_window.lo});
    cs.push_back({{1.0, 0.0, 0.0, 0.0}, -p1_window.hi});
    return reach::UnsafeRegion(std::move(cs));
}

std::optional<Interval> merging_unsafe_window(
    const reach::ReachSet& rs, double d_th, double p_end, double grid,
    const reach::AffineStepDynamics* dyn) {
    int n_cells = static_cast<int>(std::floor(p_end / grid + 1e-9));
    if (n_cells <= 0) return std::nullopt;

    std::vector<bool> clear(n_cells, true);
    for (int k = 0; k < n_cells; ++k) {
        reach::UnsafeRegion band =
            merging_band(d_th, {k * grid, (k + 1) * grid});
        for (const auto& seg : rs.segments) {
            bool hit = (dyn && seg.flow)
                           ? band.intersects_flow(*seg.flow, *dyn)
                           : band.intersects(seg.box);
            if (hit) {
                clear[k] = false;
                break;
            }
        }
    }

    int best_start = -1, best_len = 0, run_start = 0, run_len = 0;
    for (int k = 0; k <= n_cells; ++k) {
        if (k < n_cells && clear[k]) {
            if (run_len == 0) run_start = k;
            ++run_len;
        } else {
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
            run_len = 0;
        }
    }
    if (best_len == 0) return std::nullopt;
    return Interval(best_start * grid, (best_start + best_len) * grid);
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

using ExpertFn = std::function<std::pair<std::size_t, double>(const Vec&)>;

std::vector<Sample> run_rollouts(const reach::AffineStepDynamics& dyn,
                                 const ExpertFn& expert, double delta_c,
                                 const RolloutConfig& cfg,
                                 const std::function<void(Vec&)>& fixup) {
    if (cfg.rollouts <= 0 || cfg.horizon_steps <= 0)
        throw std::invalid_argument("generate_dataset: empty rollout config");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(cfg.rollouts) * cfg.horizon_steps);
    for (int r = 0; r < cfg.rollouts; ++r) {
        Vec x(cfg.sampling.dim());
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = cfg.sampling.lo(j) + unit(rng) * cfg.sampling.width(j);
        if (fixup) fixup(x);
        for (int s = 1; s <= cfg.horizon_steps; ++s) {
            auto [label, u] = expert(x);
            out.push_back({x, label, u});
            x = reach::step_exact(dyn, x, u, delta_c);
        }
    }
    return out;
}

}  // namespace

std::vector<Sample> generate_dataset(const LeftTurnScenario& sc,
                                     const RolloutConfig& cfg) {
    // Rollouts use a fixed window per trajectory; window diversity comes
    // from the sampling ranges rather than mid-rollout updates.
    auto dyn = sc.dynamics();
    dyn.box_event = nullptr;
    dyn.state_event = nullptr;
    auto fixup = [](Vec& x) {
        x[LT_TMAX] = std::max(x[LT_TMAX], x[LT_TMIN] + 1.0);
    };
    return run_rollouts(
        dyn, [&sc](const Vec& x) { return sc.expert(x); }, sc.delta_c, cfg,
        fixup);
}

std::vector<Sample> generate_dataset(const MergingScenario& sc,
                                     const RolloutConfig& cfg) {
    return run_rollouts(
        sc.dynamics(), [&sc](const Vec& x) { return sc.expert(x); }, sc.delta_c,
        cfg, nullptr);
}

std::vector<std::size_t> label_histogram(const std::vector<Sample>& data,
                                         std::size_t n_labels) {
    std::vector<std::size_t> hist(n_labels, 0);
    for (const auto& s : data) hist.at(s.label)++;
    return hist;
}

void export_dataset_csv(const std::vector<Sample>& data,
                        const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_dataset_csv: cannot open " + path);
    if (data.empty()) return;
    std::size_t n = data.front().state.size();
    for (std::size_t j = 0; j < n; ++j) os << "x_" << (j + 1) << ",";
    os << "label,u\n";
    for (const auto& s : data) {
        for (std::size_t j = 0; j < n; ++j) os << fmt17(s.state[j]) << ",";
        os << s.label << "," << fmt17(s.u) << "\n";
    }
}

}  // namespace reachplan::scenario
