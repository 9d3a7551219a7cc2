#pragma once

#include <string>
#include <vector>

#include "reachplan/bernstein.hpp"
#include "reachplan/interval.hpp"
#include "reachplan/nn.hpp"
#include "reachplan/reach.hpp"

namespace reachplan::hierarchy {

struct Trigger {
    enum class Kind { Once, EveryKSteps };
    Kind kind = Kind::Once;
    int k = 1;

    /// True when behavior selection happens at the start of this 1-based step.
    bool fires(int step_index) const {
        if (kind == Kind::Once) return step_index == 1;
        return (step_index - 1) % k == 0;
    }
};

/// Behavior planner plus N motion planners. The behavior net's scalar
/// output in (-1,1) is mapped to a motion planner by the decision regions,
/// which partition [-1,1] with disjoint interiors.
struct HierarchicalPlanner {
    nn::NeuralNetwork behavior;
    std::vector<nn::NeuralNetwork> motions;
    std::vector<Interval> decision_regions;
    std::vector<std::string> labels;  // one per motion planner
    Trigger trigger;

    static std::vector<Interval> equal_regions(std::size_t n);
    /// Region center used as the regression target for behavior k.
    static double region_center(const std::vector<Interval>& regions,
                                std::size_t k);

    void validate() const;
    std::size_t n_behaviors() const { return motions.size(); }
    /// f_m: index of the region containing mu (clamped into [-1,1]).
    std::size_t select(double mu) const;
    std::size_t index_of(const std::string& label) const;
};

struct BehaviorSet {
    std::vector<std::size_t> selected;  // indices into motions
    Interval mu_range;
    double epsilon = 0.0;  // certified error of the behavior enclosure
};

/// Certified approximation captured during a reach run, for after-the-fact
/// validation of the enclosure contract.
struct RecordedApprox {
    bernstein::CertifiedApprox approx;
    std::string net_tag;
};
using ApproxRecorder = std::vector<RecordedApprox>;

/// Enclosure of the behavior planner over the box plus every region it
/// touches.
BehaviorSet behavior_set(const HierarchicalPlanner& planner,
                         const IntervalBox& box,
                         const bernstein::BernsteinConfig& cfg,
                         ApproxRecorder* recorder = nullptr);

/// Closed-loop stepper for Algorithm 1: applies the dynamics' step-boundary
/// reset, forks on behavior selection at trigger steps, keeps sticky tags
/// otherwise, and steps each (box, tag) under the certified control range
/// clamped to the actuator bounds.
reach::Stepper make_hierarchical_stepper(const HierarchicalPlanner& planner,
                                         const reach::AffineStepDynamics& dyn,
                                         double delta_c,
                                         const bernstein::BernsteinConfig& cfg,
                                         const Interval& actuator,
                                         ApproxRecorder* recorder = nullptr);

/// Single-planner stepper: no forking, tag "single".
reach::Stepper make_single_stepper(const nn::NeuralNetwork& net,
                                   const reach::AffineStepDynamics& dyn,
                                   double delta_c,
                                   const bernstein::BernsteinConfig& cfg,
                                   const Interval& actuator,
                                   ApproxRecorder* recorder = nullptr);

/// Concrete closed-loop evaluation for simulation. Re-selects the motion
/// planner only at trigger steps and keeps the tag sticky in between.
class Executor {
public:
    explicit Executor(const HierarchicalPlanner& planner) : planner_(&planner) {}

    /// Control for the given 1-based step. Clamped to the actuator range by
    /// the motion net's own output scaling.
    double control(const Vec& x, int step_index);
    std::size_t current_behavior() const { return current_; }
    std::string current_label() const;
    void reset() { current_ = kUnset; }

private:
    static constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    const HierarchicalPlanner* planner_;
    std::size_t current_ = kUnset;
};

/// Planner bundle file: behavior + motion weight files, regions, trigger.
void save_bundle(const HierarchicalPlanner& planner, const std::string& path);
HierarchicalPlanner load_bundle(const std::string& path);

}  // namespace reachplan::hierarchy
