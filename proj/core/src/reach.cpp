#include "reachplan/reach.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace reachplan::reach {

UnsafeRegion::UnsafeRegion(std::vector<LinearConstraint> cs)
    : constraints_(std::move(cs)) {
    if (constraints_.empty())
        throw std::invalid_argument("UnsafeRegion: no constraints");
    for (const auto& c : constraints_) {
        double n2 = 0.0;
        for (double a : c.normal) n2 += a * a;
        if (n2 == 0.0)
            throw std::invalid_argument("UnsafeRegion: zero normal");
    }
}

UnsafeRegion UnsafeRegion::box(
    std::size_t dim,
    const std::vector<std::pair<std::size_t, Interval>>& ranges) {
    std::vector<LinearConstraint> cs;
    for (const auto& [j, iv] : ranges) {
        LinearConstraint lo, hi;
        lo.normal.assign(dim, 0.0);
        lo.normal[j] = -1.0;
        lo.offset = iv.lo;  // iv.lo - x_j <= 0
        hi.normal.assign(dim, 0.0);
        hi.normal[j] = 1.0;
        hi.offset = -iv.hi;  // x_j - iv.hi <= 0
        cs.push_back(std::move(lo));
        cs.push_back(std::move(hi));
    }
    return UnsafeRegion(std::move(cs));
}

bool UnsafeRegion::intersects(const IntervalBox& box) const {
    for (const auto& c : constraints_)
        if (affine_over_box(c.normal, c.offset, box).lo > 0.0) return false;
    return true;
}

bool UnsafeRegion::intersects_flow(const FlowInfo& flow,
                                   const AffineStepDynamics& dyn) const {
    const IntervalBox& X = flow.start;
    std::size_t n = X.dim();
    double dt = flow.dt;
    Interval u_range =
        affine_over_box(flow.ctrl.g, flow.ctrl.h, X).widen(flow.ctrl.w);

    for (const auto& c : constraints_) {
        // n . x(t) + o with x(t) = x0 + t (A x0 + B u + c) + t^2/2 (AB u + Ac)
        // and u = g . x0 + h +- w is, for fixed t, affine in (x0, u-slack).
        Vec Atn(n, 0.0);
        double nB = 0.0, nc = 0.0, nAB = 0.0, nAc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            nB += c.normal[j] * dyn.B[j];
            nc += c.normal[j] * dyn.c[j];
            for (std::size_t k = 0; k < n; ++k) {
                Atn[k] += c.normal[j] * dyn.A[j][k];
                nAB += c.normal[j] * dyn.A[j][k] * dyn.B[k];
                nAc += c.normal[j] * dyn.A[j][k] * dyn.c[k];
            }
        }

        // Bound on |d/dt (n . x(t))| over the whole step, for the grid gap.
        Interval acc = Interval::point(nAc) + u_range * nAB;
        Interval tacc{std::min(0.0, dt * acc.lo), std::max(0.0, dt * acc.hi)};
        Interval vel = affine_over_box(Atn, nc, X) + u_range * nB + tacc;
        double dmax = std::max(std::fabs(vel.lo), std::fabs(vel.hi));

        constexpr int kGrid = 8;
        double best = std::numeric_limits<double>::infinity();
        for (int q = 0; q <= kGrid; ++q) {
            double t = dt * q / kGrid;
            double s = t * nB + 0.5 * t * t * nAB;
            Vec coef(n);
            for (std::size_t k = 0; k < n; ++k)
                coef[k] = c.normal[k] + t * Atn[k] + s * flow.ctrl.g[k];
            double cc = s * flow.ctrl.h + t * nc + 0.5 * t * t * nAc + c.offset;
            double m = affine_over_box(coef, cc, X).lo - std::fabs(s) * flow.ctrl.w;
            best = std::min(best, m);
        }
        // A constraint that stays positive on the grid, even after covering
        // the between-sample variation, rules out an intersection.
        if (best - dmax * (0.5 * dt / kGrid) > 0.0) return false;
    }
    return true;
}

bool UnsafeRegion::contains(const Vec& x) const {
    for (const auto& c : constraints_) {
        double h = c.offset;
        for (std::size_t j = 0; j < c.normal.size(); ++j) h += c.normal[j] * x[j];
        if (h > 0.0) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Flowpipe stepping

static void check_nilpotent(const AffineStepDynamics& dyn) {
    std::size_t n = dyn.dim();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += dyn.A[i][k] * dyn.A[k][j];
            if (s != 0.0)
                throw std::runtime_error(
                    "step_affine: unsupported dynamics (A*A != 0)");
        }
    }
}

Vec step_exact(const AffineStepDynamics& dyn, const Vec& x, double u, double dt) {
    std::size_t n = dyn.dim();
    Vec drive(n);  // B u + c
    for (std::size_t j = 0; j < n; ++j) drive[j] = dyn.B[j] * u + dyn.c[j];
    Vec out(n);
    for (std::size_t j = 0; j < n; ++j) {
        double ax = 0.0, ad = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            ax += dyn.A[j][k] * x[k];
            ad += dyn.A[j][k] * drive[k];
        }
        out[j] = x[j] + dt * (ax + drive[j]) + 0.5 * dt * dt * ad;
    }
    return out;
}

StepResult step_affine(const AffineStepDynamics& dyn, const IntervalBox& box,
                       const Interval& u_range, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("step_affine: dt must be > 0");
    if (box.dim() != dyn.dim())
        throw std::invalid_argument("step_affine: dim mismatch");
    check_nilpotent(dyn);

    std::size_t n = dyn.dim();
    // Row j of A*B and of A*c.
    Vec AB(n, 0.0), Ac(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            AB[j] += dyn.A[j][k] * dyn.B[k];
            Ac[j] += dyn.A[j][k] * dyn.c[k];
        }

    // Endpoint: x_j(dt) is affine in (x0, u); evaluate exactly over box x u.
    Vec lo(n), hi(n), slo(n), shi(n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec coef(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) coef[k] = dt * dyn.A[j][k];
        coef[j] += 1.0;
        double cu = dt * dyn.B[j] + 0.5 * dt * dt * AB[j];
        double cc = dt * dyn.c[j] + 0.5 * dt * dt * Ac[j];
        Interval e = affine_over_box(coef, cc, box) + u_range * cu;
        lo[j] = e.lo;
        hi[j] = e.hi;

        // Span: x_j(t) = a + b t + g t^2/2 with interval coefficients.
        Interval a = box.at(j);
        Vec arow(n);
        for (std::size_t k = 0; k < n; ++k) arow[k] = dyn.A[j][k];
        Interval b = affine_over_box(arow, dyn.c[j], box) + u_range * dyn.B[j];
        Interval g = Interval::point(Ac[j]) + u_range * AB[j];

        auto quad_min = [&](double bb, double gg) {
            double m = std::min(0.0, bb * dt + 0.5 * gg * dt * dt);
            if (gg > 0.0) {
                double ts = -bb / gg;
                if (ts > 0.0 && ts < dt)
                    m = std::min(m, bb * ts + 0.5 * gg * ts * ts);
            }
            return m;
        };
        auto quad_max = [&](double bb, double gg) {
            double m = std::max(0.0, bb * dt + 0.5 * gg * dt * dt);
            if (gg < 0.0) {
                double ts = -bb / gg;
                if (ts > 0.0 && ts < dt)
                    m = std::max(m, bb * ts + 0.5 * gg * ts * ts);
            }
            return m;
        };
        slo[j] = std::min(a.lo + quad_min(b.lo, g.lo), e.lo);
        shi[j] = std::max(a.hi + quad_max(b.hi, g.hi), e.hi);
    }

    StepResult r;
    r.endpoint = IntervalBox(std::move(lo), std::move(hi));
    r.span_hull = IntervalBox(std::move(slo), std::move(shi));
    return r;
}

StepResult step_affine_feedback(const AffineStepDynamics& dyn,
                                const IntervalBox& box,
                                const AffineControl& ctrl, double dt) {
    if (dt <= 0.0)
        throw std::invalid_argument("step_affine_feedback: dt must be > 0");
    if (box.dim() != dyn.dim() || ctrl.g.size() != dyn.dim())
        throw std::invalid_argument("step_affine_feedback: dim mismatch");
    if (ctrl.w < 0.0)
        throw std::invalid_argument("step_affine_feedback: negative slack");
    check_nilpotent(dyn);

    std::size_t n = dyn.dim();
    Vec AB(n, 0.0), Ac(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            AB[j] += dyn.A[j][k] * dyn.B[k];
            Ac[j] += dyn.A[j][k] * dyn.c[k];
        }

    // Control value range over the box, for the in-step acceleration.
    Interval u_range =
        affine_over_box(ctrl.g, ctrl.h, box).widen(ctrl.w);

    // x'(dt) = x + dt A x + s (g.x + h +- w) + dt c + dt^2/2 A c,
    // with s_j = dt B_j + dt^2/2 (A B)_j.
    Vec lo(n), hi(n), slo(n), shi(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = dt * dyn.B[j] + 0.5 * dt * dt * AB[j];
        Vec coef(n);
        for (std::size_t k = 0; k < n; ++k)
            coef[k] = dt * dyn.A[j][k] + s * ctrl.g[k];
        coef[j] += 1.0;
        double cc = s * ctrl.h + dt * dyn.c[j] + 0.5 * dt * dt * Ac[j];
        Interval e =
            affine_over_box(coef, cc, box).widen(std::fabs(s) * ctrl.w);
        lo[j] = e.lo;
        hi[j] = e.hi;

        // In-step trajectory per coordinate is quadratic in t with constant
        // acceleration (A (B u + c))_j, so it stays within the chord hull
        // plus the quadratic sag a dt^2 / 8.
        Interval accel = Interval::point(Ac[j]) + u_range * AB[j];
        double sag =
            0.125 * dt * dt * std::max(std::fabs(accel.lo), std::fabs(accel.hi));
        slo[j] = std::min(box.lo(j), e.lo) - sag;
        shi[j] = std::max(box.hi(j), e.hi) + sag;
    }

    StepResult r;
    r.endpoint = IntervalBox(std::move(lo), std::move(hi));
    r.span_hull = IntervalBox(std::move(slo), std::move(shi));
    return r;
}

// ---------------------------------------------------------------------------
// Partition

std::vector<IntervalBox> partition(const IntervalBox& box, const Vec& delta) {
    if (delta.size() != box.dim())
        throw std::invalid_argument("partition: delta dim mismatch");
    std::size_t n = box.dim();
    std::vector<std::size_t> cuts(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
        if (delta[j] <= 0.0)
            throw std::invalid_argument("partition: delta must be > 0");
        double w = box.width(j);
        if (w > 0.0)
            cuts[j] = static_cast<std::size_t>(std::ceil(w / delta[j] - 1e-12));
        if (cuts[j] == 0) cuts[j] = 1;
    }
    std::size_t total = 1;
    for (std::size_t j = 0; j < n; ++j) total *= cuts[j];

    std::vector<IntervalBox> cells;
    cells.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec lo(n), hi(n);
        for (std::size_t j = 0; j < n; ++j) {
            double w = box.width(j);
            double a = box.lo(j) + w * static_cast<double>(idx[j]) / cuts[j];
            double b = (idx[j] + 1 == cuts[j])
                           ? box.hi(j)
                           : box.lo(j) + w * static_cast<double>(idx[j] + 1) / cuts[j];
            lo[j] = a;
            hi[j] = b;
        }
        cells.emplace_back(std::move(lo), std::move(hi));
        for (std::size_t j = n; j-- > 0;) {
            if (++idx[j] < cuts[j]) break;
            idx[j] = 0;
        }
    }
    return cells;
}

std::vector<IntervalBox> partition(const IntervalBox& box, double delta) {
    return partition(box, Vec(box.dim(), delta));
}

// ---------------------------------------------------------------------------
// ReachSet helpers

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Safe: return "Safe";
        case Verdict::Uncertain: return "Uncertain";
        case Verdict::InProgress: return "InProgress";
    }
    return "InProgress";
}

std::vector<ReachSegment> ReachSet::at_step(int step_index) const {
    std::vector<ReachSegment> out;
    for (const auto& s : segments)
        if (s.step_index == step_index) out.push_back(s);
    return out;
}

int ReachSet::max_step() const {
    int m = 0;
    for (const auto& s : segments) m = std::max(m, s.step_index);
    return m;
}

// ---------------------------------------------------------------------------
// Reach_Comp

ReachCompResult reach_comp(const TaggedBox& cell, int start_step, int n,
                           const Stepper& stepper, const ReachConfig& cfg) {
    auto started = std::chrono::steady_clock::now();
    ReachCompResult res;
    std::vector<TaggedBox> frontier = {cell};

    for (int s = 1; s <= n; ++s) {
        int step_index = start_step + s;
        std::vector<TaggedBox> next;
        std::vector<ReachSegment> step_segments;
        for (const auto& tb : frontier) {
            StepOutcome out = stepper(tb.box, tb.tag, step_index);
            if (out.abort) {
                res.abort_reason = *out.abort;
                return res;
            }
            for (auto& child : out.children) {
                if (child.epsilon > cfg.epsilon_cap) {
                    res.abort_reason = "accuracy";
                    char d[96];
                    std::snprintf(d, sizeof(d), "eps %.3g > cap %.3g [%s]",
                                  child.epsilon, cfg.epsilon_cap,
                                  child.tag.c_str());
                    res.abort_detail = d;
                    return res;
                }
                for (std::size_t j = 0; j < tb.box.dim(); ++j) {
                    double ratio = (child.endpoint.width(j) + cfg.growth_floor) /
                                   (tb.box.width(j) + cfg.growth_floor);
                    if (ratio > cfg.growth_gate) {
                        res.abort_reason = "accuracy";
                        char d[96];
                        std::snprintf(d, sizeof(d),
                                      "growth dim %zu ratio %.3g > %.3g [%s]", j,
                                      ratio, cfg.growth_gate, child.tag.c_str());
                        res.abort_detail = d;
                        return res;
                    }
                }
                ReachSegment seg;
                seg.step_index = step_index;
                seg.t_lo = cfg.t0 + (step_index - 1) * cfg.delta_c;
                seg.t_hi = cfg.t0 + step_index * cfg.delta_c;
                seg.box = child.span_hull;
                seg.endpoint_box = child.endpoint;
                seg.planner_tag = child.tag;
                seg.flow = child.flow;
                step_segments.push_back(seg);
                next.push_back({child.endpoint, child.tag});
            }
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        if (elapsed > cfg.cell_time_budget_s) {
            res.abort_reason = "timeout";
            return res;
        }
        res.segments.insert(res.segments.end(), step_segments.begin(),
                            step_segments.end());
        frontier = std::move(next);
    }
    res.ok = true;
    res.frontier = std::move(frontier);
    return res;
}

// ---------------------------------------------------------------------------
// Algorithm: partition and union

namespace {

struct CellOutcome {
    bool ok = false;
    std::vector<ReachSegment> segments;
    std::vector<TaggedBox> frontier;
};

CellOutcome propagate_cell(const TaggedBox& cell, int start_step,
                           const Vec& delta, int depth, const Stepper& stepper,
                           const ReachConfig& cfg, RunMetadata& meta) {
    ReachCompResult r =
        reach_comp(cell, start_step, cfg.steps_per_round, stepper, cfg);
    if (r.ok) {
        CellOutcome out;
        out.ok = true;
        out.segments = std::move(r.segments);
        out.frontier = std::move(r.frontier);
        return out;
    }
    ++meta.refinement_events;
    meta.events.push_back(
        "refine step=" + std::to_string(start_step + 1) +
        " depth=" + std::to_string(depth + 1) + " reason=" + r.abort_reason +
        (r.abort_detail.empty() ? "" : " (" + r.abort_detail + ")"));
    if (depth >= cfg.max_refine_depth) return {};

    Vec half(delta.size());
    for (std::size_t j = 0; j < delta.size(); ++j) half[j] = 0.5 * delta[j];
    CellOutcome merged;
    merged.ok = true;
    for (const auto& sub : partition(cell.box, half)) {
        CellOutcome o = propagate_cell({sub, cell.tag}, start_step, half,
                                       depth + 1, stepper, cfg, meta);
        if (!o.ok) return {};
        merged.segments.insert(merged.segments.end(), o.segments.begin(),
                               o.segments.end());
        merged.frontier.insert(merged.frontier.end(), o.frontier.begin(),
                               o.frontier.end());
    }
    return merged;
}

// Unions the frontier per planner tag into one hull box each. Keeps the
// round-over-round cell count bounded: without this, re-partitioning every
// endpoint box separately compounds the cell count across rounds. Tags stay
// separate so behavior branches remain distinct. Order follows first
// appearance, keeping runs deterministic.
std::vector<TaggedBox> union_frontier(const std::vector<TaggedBox>& frontier) {
    std::vector<TaggedBox> merged;
    for (const auto& tb : frontier) {
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const TaggedBox& m) { return m.tag == tb.tag; });
        if (it == merged.end())
            merged.push_back(tb);
        else
            it->box = it->box.hull(tb.box);
    }
    return merged;
}

}  // namespace

ReachSet algorithm1(const IntervalBox& initial, const UnsafeRegion& unsafe,
                    const IntervalBox& goal, const Stepper& stepper,
                    const ReachConfig& cfg, RunMetadata* meta_out,
                    const AffineStepDynamics* dyn) {
    auto started = std::chrono::steady_clock::now();
    RunMetadata local;
    RunMetadata& meta = meta_out ? *meta_out : local;

    if (unsafe.intersects(initial))
        throw std::invalid_argument("algorithm1: initial set intersects unsafe set");

    ReachSet rs;
    std::vector<TaggedBox> frontier = {{initial, cfg.initial_tag}};
    int step = 0;

    auto finish = [&](Verdict v, std::string reason) {
        rs.verdict = v;
        rs.reason = std::move(reason);
        meta.steps_completed = step;
        meta.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        return rs;
    };

    while (true) {
        bool all_in_goal = !frontier.empty();
        for (const auto& tb : frontier)
            if (!goal.contains(tb.box)) {
                all_in_goal = false;
                break;
            }
        if (all_in_goal) return finish(Verdict::Safe, "goal reached");
        if (frontier.empty())
            return finish(Verdict::Uncertain, "empty frontier");
        if (step >= cfg.max_steps)
            return finish(Verdict::Uncertain, "horizon exhausted");

        std::vector<ReachSegment> round_segments;
        std::vector<TaggedBox> next_frontier;
        for (const auto& tb : frontier) {
            for (const auto& cell : partition(tb.box, cfg.delta)) {
                CellOutcome o = propagate_cell({cell, tb.tag}, step, cfg.delta, 0,
                                               stepper, cfg, meta);
                if (!o.ok)
                    return finish(Verdict::Uncertain, "refinement exhausted");
                round_segments.insert(round_segments.end(), o.segments.begin(),
                                      o.segments.end());
                next_frontier.insert(next_frontier.end(), o.frontier.begin(),
                                     o.frontier.end());
            }
        }

        rs.segments.insert(rs.segments.end(), round_segments.begin(),
                           round_segments.end());
        for (const auto& seg : round_segments) {
            bool hit = (dyn && seg.flow)
                           ? unsafe.intersects_flow(*seg.flow, *dyn)
                           : unsafe.intersects(seg.box);
            if (hit) {
                step += cfg.steps_per_round;
                return finish(Verdict::Uncertain,
                              "unsafe overlap at step " +
                                  std::to_string(seg.step_index));
            }
        }
        frontier = union_frontier(next_frontier);
        step += cfg.steps_per_round;
    }
}

// ---------------------------------------------------------------------------
// Branch clustering

static std::vector<Interval> merge_intervals(std::vector<Interval> ivs) {
    if (ivs.empty()) return {};
    std::sort(ivs.begin(), ivs.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out = {ivs[0]};
    for (std::size_t i = 1; i < ivs.size(); ++i) {
        if (ivs[i].lo <= out.back().hi)
            out.back().hi = std::max(out.back().hi, ivs[i].hi);
        else
            out.push_back(ivs[i]);
    }
    return out;
}

std::vector<Interval> branch_clusters(const ReachSet& rs, int step_index,
                                      std::size_t dim) {
    std::vector<Interval> projections;
    for (const auto& seg : rs.segments)
        if (seg.step_index == step_index) projections.push_back(seg.box.at(dim));
    return merge_intervals(std::move(projections));
}

std::vector<double> cluster_gaps(const std::vector<Interval>& clusters) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < clusters.size(); ++i)
        gaps.push_back(clusters[i].lo - clusters[i - 1].hi);
    return gaps;
}

std::vector<Interval> cluster_points(Vec values, double gap_tol) {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    std::vector<Interval> out = {Interval::point(values[0])};
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] - out.back().hi > gap_tol)
            out.push_back(Interval::point(values[i]));
        else
            out.back().hi = values[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

void export_csv(const ReachSet& rs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_csv: cannot open " + path);
    std::size_t n = rs.segments.empty() ? 0 : rs.segments[0].box.dim();
    os << "step_index,t_lo,t_hi,planner_tag";
    for (std::size_t j = 1; j <= n; ++j) os << ",lo_" << j;
    for (std::size_t j = 1; j <= n; ++j) os << ",hi_" << j;
    os << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ',' << buf;
    };
    for (const auto& seg : rs.segments) {
        os << seg.step_index;
        put(seg.t_lo);
        put(seg.t_hi);
        os << ',' << (seg.planner_tag.empty() ? "single" : seg.planner_tag);
        for (std::size_t j = 0; j < n; ++j) put(seg.box.lo(j));
        for (std::size_t j = 0; j < n; ++j) put(seg.box.hi(j));
        os << "\n";
    }
}

}  // namespace reachplan::reach
