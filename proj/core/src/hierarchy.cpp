#include "reachplan/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace reachplan::hierarchy {

std::vector<Interval> HierarchicalPlanner::equal_regions(std::size_t n) {
    std::vector<Interval> regions;
    for (std::size_t k = 0; k < n; ++k) {
        double lo = -1.0 + 2.0 * static_cast<double>(k) / n;
        double hi = (k + 1 == n) ? 1.0 : -1.0 + 2.0 * static_cast<double>(k + 1) / n;
        regions.emplace_back(lo, hi);
    }
    return regions;
}

double HierarchicalPlanner::region_center(const std::vector<Interval>& regions,
                                          std::size_t k) {
    return regions.at(k).mid();
}

void HierarchicalPlanner::validate() const {
    if (motions.size() < 2)
        throw std::invalid_argument("HierarchicalPlanner: need N >= 2 motion nets");
    if (decision_regions.size() != motions.size())
        throw std::invalid_argument(
            "HierarchicalPlanner: regions/motions count mismatch");
    if (labels.size() != motions.size())
        throw std::invalid_argument(
            "HierarchicalPlanner: labels/motions count mismatch");
    if (behavior.output_dim() != 1)
        throw std::invalid_argument("HierarchicalPlanner: behavior net not scalar");
    double cursor = -1.0;
    for (const auto& r : decision_regions) {
        if (std::fabs(r.lo - cursor) > 1e-12)
            throw std::invalid_argument(
                "HierarchicalPlanner: decision regions do not tile [-1,1]");
        cursor = r.hi;
    }
    if (std::fabs(cursor - 1.0) > 1e-12)
        throw std::invalid_argument(
            "HierarchicalPlanner: decision regions do not end at 1");
    for (const auto& m : motions)
        if (m.input_dim() != behavior.input_dim())
            throw std::invalid_argument(
                "HierarchicalPlanner: input dims do not match");
}

std::size_t HierarchicalPlanner::select(double mu) const {
    double v = std::clamp(mu, -1.0, 1.0);
    for (std::size_t k = 0; k < decision_regions.size(); ++k) {
        // region k owns [lo, hi); the last region also owns hi = 1
        if (v < decision_regions[k].hi || k + 1 == decision_regions.size())
            return k;
    }
    return decision_regions.size() - 1;
}

std::size_t HierarchicalPlanner::index_of(const std::string& label) const {
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k] == label) return k;
    throw std::invalid_argument("HierarchicalPlanner: unknown tag '" + label + "'");
}

BehaviorSet behavior_set(const HierarchicalPlanner& planner,
                         const IntervalBox& box,
                         const bernstein::BernsteinConfig& cfg,
                         ApproxRecorder* recorder) {
    bernstein::ScalarFn mu = [&planner](const Vec& x) {
        return planner.behavior.forward_scalar(x);
    };
    double lip = planner.behavior.lipschitz_physical(box, nn::Norm::L2);
    auto degrees = bernstein::degree_vector(cfg, box.dim());
    int grid = cfg.behavior_grid_per_dim > 0 ? cfg.behavior_grid_per_dim
                                             : cfg.grid_per_dim;
    bernstein::CertifiedApprox ca =
        bernstein::certify(mu, lip, box, degrees, grid, "behavior");
    if (recorder) recorder->push_back({ca, "behavior"});

    BehaviorSet bs;
    bs.epsilon = ca.epsilon;
    bs.mu_range = ca.poly.refined_range(cfg.range_refine)
                      .widen(ca.epsilon)
                      .intersect({-1.0, 1.0});
    for (std::size_t k = 0; k < planner.decision_regions.size(); ++k)
        if (planner.decision_regions[k].intersects(bs.mu_range))
            bs.selected.push_back(k);
    return bs;
}

namespace {

struct ControlEnclosure {
    reach::AffineControl ctrl;  // slack already includes the certified eps
    double epsilon;
};

ControlEnclosure control_range(const nn::NeuralNetwork& net,
                               const IntervalBox& box,
                               const bernstein::BernsteinConfig& cfg,
                               const std::string& tag,
                               ApproxRecorder* recorder) {
    bernstein::ScalarFn f = [&net](const Vec& x) { return net.forward_scalar(x); };
    double lip = net.lipschitz_physical(box, nn::Norm::L2);
    auto degrees = bernstein::degree_vector(cfg, box.dim());
    bernstein::CertifiedApprox ca =
        bernstein::certify(f, lip, box, degrees, cfg.grid_per_dim, tag);
    if (recorder) recorder->push_back({ca, tag});
    bernstein::AffineEnclosure enc = ca.poly.affine_enclosure();
    return {{enc.g, enc.h, enc.w + ca.epsilon}, ca.epsilon};
}

struct EnclosedStep {
    reach::StepResult sr;
    reach::FlowInfo flow;
};

// Steps the box under the control enclosure. Uses the state-feedback form
// when the enclosed control stays within the actuator range; otherwise the
// network is (partly) saturated, and the interval form clamped to the
// actuator range is both sound and tighter.
EnclosedStep step_enclosed(const reach::AffineStepDynamics& dyn,
                           const IntervalBox& box,
                           const reach::AffineControl& ctrl,
                           const Interval& actuator, double dt) {
    Interval u = affine_over_box(ctrl.g, ctrl.h, box).widen(ctrl.w);
    if (u.lo >= actuator.lo && u.hi <= actuator.hi)
        return {reach::step_affine_feedback(dyn, box, ctrl, dt),
                {box, ctrl, dt}};
    Interval uc = u.intersect(actuator);
    reach::AffineControl flat{Vec(box.dim(), 0.0), uc.mid(),
                              0.5 * (uc.hi - uc.lo)};
    return {reach::step_affine(dyn, box, uc, dt), {box, flat, dt}};
}

}  // namespace

reach::Stepper make_hierarchical_stepper(const HierarchicalPlanner& planner,
                                         const reach::AffineStepDynamics& dyn,
                                         double delta_c,
                                         const bernstein::BernsteinConfig& cfg,
                                         const Interval& actuator,
                                         ApproxRecorder* recorder) {
    planner.validate();
    return [&planner, &dyn, delta_c, cfg, actuator, recorder](
               const IntervalBox& box, const std::string& tag,
               int step_index) -> reach::StepOutcome {
        IntervalBox b = box;
        if (dyn.box_event) dyn.box_event(b);

        std::vector<std::size_t> active;
        double eps_mu = 0.0;
        if (planner.trigger.fires(step_index)) {
            BehaviorSet bs = behavior_set(planner, b, cfg, recorder);
            active = bs.selected;
            eps_mu = bs.epsilon;
            // On a re-trigger, keep the branch already being followed even
            // when the fresh behavior enclosure no longer selects it: the
            // extra branch only enlarges the overapproximation, and it makes
            // an every-step-trigger run a per-step superset of the sticky
            // single-trigger run.
            if (!tag.empty()) {
                std::size_t cur = planner.index_of(tag);
                if (std::find(active.begin(), active.end(), cur) ==
                    active.end())
                    active.push_back(cur);
            }
            if (active.empty())
                return {.children = {}, .abort = "empty behavior set"};
        } else {
            active.push_back(planner.index_of(tag));
        }

        reach::StepOutcome out;
        for (std::size_t k : active) {
            ControlEnclosure ce = control_range(planner.motions[k], b, cfg,
                                                planner.labels[k], recorder);
            EnclosedStep es = step_enclosed(dyn, b, ce.ctrl, actuator, delta_c);
            out.children.push_back({es.sr.span_hull, es.sr.endpoint,
                                    planner.labels[k],
                                    std::max(ce.epsilon, eps_mu), es.flow});
        }
        return out;
    };
}

reach::Stepper make_single_stepper(const nn::NeuralNetwork& net,
                                   const reach::AffineStepDynamics& dyn,
                                   double delta_c,
                                   const bernstein::BernsteinConfig& cfg,
                                   const Interval& actuator,
                                   ApproxRecorder* recorder) {
    return [&net, &dyn, delta_c, cfg, actuator, recorder](
               const IntervalBox& box, const std::string&,
               int) -> reach::StepOutcome {
        IntervalBox b = box;
        if (dyn.box_event) dyn.box_event(b);
        ControlEnclosure ce = control_range(net, b, cfg, "single", recorder);
        EnclosedStep es = step_enclosed(dyn, b, ce.ctrl, actuator, delta_c);
        reach::StepOutcome out;
        out.children.push_back(
            {es.sr.span_hull, es.sr.endpoint, "single", ce.epsilon, es.flow});
        return out;
    };
}

double Executor::control(const Vec& x, int step_index) {
    if (planner_->trigger.fires(step_index) || current_ == kUnset)
        current_ = planner_->select(planner_->behavior.forward_scalar(x));
    return planner_->motions[current_].forward_scalar(x);
}

std::string Executor::current_label() const {
    if (current_ == kUnset) return "";
    return planner_->labels[current_];
}

// ---------------------------------------------------------------------------
// Bundle file

void save_bundle(const HierarchicalPlanner& planner, const std::string& path) {
    planner.validate();
    namespace fs = std::filesystem;
    fs::path base = fs::path(path).parent_path();
    fs::path stem = fs::path(path).stem();

    nlohmann::json j;
    std::string bpath = (stem.string() + "_behavior.json");
    nn::save_weights(planner.behavior, (base / bpath).string());
    j["behavior"] = bpath;
    for (std::size_t k = 0; k < planner.motions.size(); ++k) {
        std::string mpath = stem.string() + "_" + planner.labels[k] + ".json";
        nn::save_weights(planner.motions[k], (base / mpath).string());
        j["motions"].push_back(mpath);
    }
    j["labels"] = planner.labels;
    for (const auto& r : planner.decision_regions)
        j["decision_regions"].push_back({r.lo, r.hi});
    j["trigger"]["kind"] =
        planner.trigger.kind == Trigger::Kind::Once ? "once" : "every_k_steps";
    j["trigger"]["k"] = planner.trigger.k;

    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_bundle: cannot open " + path);
    os << j.dump(2) << "\n";
}

HierarchicalPlanner load_bundle(const std::string& path) {
    namespace fs = std::filesystem;
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_bundle: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("bundle file: ") + e.what());
    }
    fs::path base = fs::path(path).parent_path();

    HierarchicalPlanner p;
    p.behavior = nn::load_weights((base / j.at("behavior").get<std::string>()).string());
    for (const auto& m : j.at("motions"))
        p.motions.push_back(nn::load_weights((base / m.get<std::string>()).string()));
    p.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& r : j.at("decision_regions"))
        p.decision_regions.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    std::string kind = j.at("trigger").at("kind").get<std::string>();
    p.trigger.kind =
        kind == "once" ? Trigger::Kind::Once : Trigger::Kind::EveryKSteps;
    p.trigger.k = j.at("trigger").at("k").get<int>();
    p.validate();
    return p;
}

}  // namespace reachplan::hierarchy
