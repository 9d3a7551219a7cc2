#include "reachplan/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <stdexcept>

namespace reachplan::sim {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                           23, 29, 31, 37, 41, 43, 47, 53};

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double halton(std::uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

Vec halton_point(std::uint64_t index, const IntervalBox& box) {
    if (box.dim() > std::size(kPrimes))
        throw std::invalid_argument("halton_point: too many dimensions");
    Vec x(box.dim());
    for (std::size_t j = 0; j < box.dim(); ++j)
        x[j] = box.lo(j) + halton(index, kPrimes[j]) * box.width(j);
    return x;
}

Trajectory simulate(const reach::AffineStepDynamics& dyn, Vec x0,
                    const ControlFn& ctrl, const SimConfig& cfg,
                    const reach::UnsafeRegion* unsafe) {
    Trajectory tr;
    Vec x = std::move(x0);
    int m = std::max(cfg.unsafe_samples_per_step, 1);
    for (int s = 1; s <= cfg.steps; ++s) {
        if (dyn.state_event) dyn.state_event(x);
        double u = ctrl(x, s);
        std::string tag = cfg.tag_of ? cfg.tag_of(s) : std::string();
        tr.points.push_back({s - 1, cfg.t0 + (s - 1) * cfg.delta_c, x, u, tag});

        if (unsafe) {
            for (int q = 0; q <= m; ++q) {
                Vec xi = reach::step_exact(dyn, x, u, cfg.delta_c * q / m);
                if (unsafe->contains(xi)) {
                    tr.hit_unsafe = true;
                    tr.unsafe_step = s;
                    break;
                }
            }
            if (tr.hit_unsafe) break;
        }
        x = reach::step_exact(dyn, x, u, cfg.delta_c);
    }
    if (!tr.hit_unsafe)
        tr.points.push_back(
            {cfg.steps, cfg.t0 + cfg.steps * cfg.delta_c, x, 0.0, ""});
    return tr;
}

namespace {

struct StageHit {
    std::uint64_t index = 0;
    Vec x0;
    Trajectory trace;
};

std::optional<StageHit> scan_range(std::uint64_t first, std::uint64_t last,
                                   const IntervalBox& initial,
                                   const reach::AffineStepDynamics& dyn,
                                   const ControlFactory& make_ctrl,
                                   const reach::UnsafeRegion& unsafe,
                                   const SimConfig& sim_cfg) {
    for (std::uint64_t i = first; i < last; ++i) {
        Vec x0 = halton_point(i, initial);
        ControlFn ctrl = make_ctrl();
        Trajectory tr = simulate(dyn, x0, ctrl, sim_cfg, &unsafe);
        if (tr.hit_unsafe) return StageHit{i, std::move(x0), std::move(tr)};
    }
    return std::nullopt;
}

}  // namespace

FalsifyResult falsify(const IntervalBox& initial,
                      const reach::AffineStepDynamics& dyn,
                      const ControlFactory& make_ctrl,
                      const reach::UnsafeRegion& unsafe,
                      const FalsifyConfig& cfg) {
    FalsifyResult res;
    std::uint64_t next = 1 + cfg.index_offset;  // Halton index 0 is the corner
    for (int count : cfg.schedule) {
        if (count <= 0) continue;
        std::uint64_t first = next, last = next + count;
        next = last;

        std::optional<StageHit> hit;
        int workers = std::max(cfg.workers, 1);
        if (workers == 1) {
            hit = scan_range(first, last, initial, dyn, make_ctrl, unsafe,
                             cfg.sim);
        } else {
            std::uint64_t chunk = (last - first + workers - 1) / workers;
            std::vector<std::future<std::optional<StageHit>>> futs;
            for (int w = 0; w < workers; ++w) {
                std::uint64_t a = first + w * chunk;
                std::uint64_t b = std::min(a + chunk, last);
                if (a >= b) break;
                futs.push_back(std::async(std::launch::async, scan_range, a, b,
                                          std::cref(initial), std::cref(dyn),
                                          std::cref(make_ctrl),
                                          std::cref(unsafe),
                                          std::cref(cfg.sim)));
            }
            for (auto& f : futs) {
                auto h = f.get();
                if (h && (!hit || h->index < hit->index)) hit = std::move(h);
            }
        }

        if (hit) {
            res.found = true;
            res.samples_used = static_cast<int>(hit->index - cfg.index_offset);
            res.counterexample = std::move(hit->x0);
            res.trace = std::move(hit->trace);
            return res;
        }
        res.samples_used = static_cast<int>(last - 1 - cfg.index_offset);
    }
    return res;
}

ContainmentReport containment_check(const reach::ReachSet& rs,
                                    const IntervalBox& initial,
                                    const reach::AffineStepDynamics& dyn,
                                    const ControlFactory& make_ctrl,
                                    const SimConfig& cfg, int n_trajectories,
                                    double tol) {
    ContainmentReport rep;
    SimConfig sim_cfg = cfg;
    sim_cfg.steps = std::min(cfg.steps, rs.max_step());

    for (int i = 1; i <= n_trajectories; ++i) {
        Vec x0 = halton_point(static_cast<std::uint64_t>(i), initial);
        ControlFn ctrl = make_ctrl();
        Trajectory tr = simulate(dyn, std::move(x0), ctrl, sim_cfg);
        ++rep.trajectories;

        bool bad = false;
        for (const auto& pt : tr.points) {
            // A recorded state is the start of the next step (after any
            // discrete reset), so it must lie in that step's span boxes;
            // the final state belongs to the last step's span.
            int check_step = std::min(pt.step_index + 1, sim_cfg.steps);
            auto segs = rs.at_step(check_step);
            if (segs.empty()) continue;
            bool inside = false;
            for (const auto& seg : segs)
                if (seg.box.contains(pt.state, tol)) {
                    inside = true;
                    break;
                }
            if (!inside) {
                bad = true;
                if (rep.first_violation_step < 0 ||
                    check_step < rep.first_violation_step)
                    rep.first_violation_step = check_step;
                break;
            }
        }
        if (bad) ++rep.violations;
    }
    return rep;
}

void export_trajectory_csv(const Trajectory& tr, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("export_trajectory_csv: cannot open " + path);
    if (tr.points.empty()) return;
    std::size_t n = tr.points.front().state.size();
    os << "step_index,t,planner_tag,u";
    for (std::size_t j = 0; j < n; ++j) os << ",x_" << (j + 1);
    os << "\n";
    for (const auto& pt : tr.points) {
        os << pt.step_index << "," << fmt17(pt.t) << "," << pt.tag << ","
           << fmt17(pt.u);
        for (std::size_t j = 0; j < n; ++j) os << "," << fmt17(pt.state[j]);
        os << "\n";
    }
}

}  // namespace reachplan::sim
