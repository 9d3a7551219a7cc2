// Microbenchmarks for the hot paths of the verification pipeline:
// Bernstein construction/certification/evaluation, the affine flowpipe
// steps, and a small end-to-end Algorithm 1 run.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "reachplan/bernstein.hpp"
#include "reachplan/nn.hpp"
#include "reachplan/reach.hpp"
#include "reachplan/sim.hpp"

using namespace reachplan;

namespace {

nn::NeuralNetwork small_net(std::size_t in_dim) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> w(-0.5, 0.5);
    auto layer = [&](std::size_t out, std::size_t in,
                     nn::Activation act) {
        nn::Layer l;
        l.activation = act;
        l.weights.assign(out, Vec(in));
        l.bias.assign(out, 0.0);
        for (auto& row : l.weights)
            for (auto& v : row) v = w(rng);
        for (auto& b : l.bias) b = w(rng);
        return l;
    };
    std::vector<nn::Layer> layers;
    layers.push_back(layer(32, in_dim, nn::Activation::Tanh));
    layers.push_back(layer(32, 32, nn::Activation::Tanh));
    layers.push_back(layer(1, 32, nn::Activation::Linear));
    return nn::NeuralNetwork(layers, nn::Normalization::identity(in_dim),
                             nn::OutputScale{-4.0, 3.0});
}

IntervalBox cell2() { return IntervalBox({-60.4, 9.0}, {-60.0, 9.25}); }

reach::AffineStepDynamics double_integrator() {
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0, 1.0}, {0.0, 0.0}};
    dyn.B = {0.0, 1.0};
    dyn.c = {0.0, 0.0};
    return dyn;
}

void bm_nn_forward(benchmark::State& state) {
    auto net = small_net(2);
    Vec x = {-60.2, 9.1};
    for (auto _ : state) benchmark::DoNotOptimize(net.forward_scalar(x));
}
BENCHMARK(bm_nn_forward);

void bm_build_bernstein(benchmark::State& state) {
    auto net = small_net(2);
    auto f = [&](const Vec& x) { return net.forward_scalar(x); };
    IntervalBox box = cell2();
    for (auto _ : state)
        benchmark::DoNotOptimize(bernstein::build_bernstein(f, box, {2, 2}));
}
BENCHMARK(bm_build_bernstein);

void bm_certify(benchmark::State& state) {
    auto net = small_net(2);
    auto f = [&](const Vec& x) { return net.forward_scalar(x); };
    double lip = net.lipschitz_physical(cell2(), nn::Norm::L2);
    int grid = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            bernstein::certify(f, lip, cell2(), {2, 2}, grid, "bench"));
}
BENCHMARK(bm_certify)->Arg(8)->Arg(16)->Arg(24);

void bm_poly_eval(benchmark::State& state) {
    auto net = small_net(2);
    auto poly = bernstein::build_bernstein(
        [&](const Vec& x) { return net.forward_scalar(x); }, cell2(), {2, 2});
    Vec x = {-60.2, 9.1};
    for (auto _ : state) benchmark::DoNotOptimize(poly.eval(x));
}
BENCHMARK(bm_poly_eval);

void bm_step_affine(benchmark::State& state) {
    auto dyn = double_integrator();
    IntervalBox box = cell2();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            reach::step_affine(dyn, box, {-1.0, 0.5}, 0.5));
}
BENCHMARK(bm_step_affine);

void bm_step_affine_feedback(benchmark::State& state) {
    auto dyn = double_integrator();
    IntervalBox box = cell2();
    reach::AffineControl ctrl{{0.0, -1.5}, 15.0, 0.05};
    for (auto _ : state)
        benchmark::DoNotOptimize(
            reach::step_affine_feedback(dyn, box, ctrl, 0.5));
}
BENCHMARK(bm_step_affine_feedback);

void bm_partition(benchmark::State& state) {
    IntervalBox box({-64.35, 8.0}, {-60.05, 10.0});
    for (auto _ : state)
        benchmark::DoNotOptimize(reach::partition(box, {0.5, 0.25}));
}
BENCHMARK(bm_partition);

void bm_halton_point(benchmark::State& state) {
    IntervalBox box({-64.35, 8.0, 14.0, 16.0, 6.0},
                    {-60.05, 10.0, 14.0, 16.0, 6.0});
    std::uint64_t i = 1;
    for (auto _ : state) benchmark::DoNotOptimize(sim::halton_point(i++, box));
}
BENCHMARK(bm_halton_point);

void bm_algorithm1_drift(benchmark::State& state) {
    // Small end-to-end run: 1-D drift, 10 steps, partitioned frontier.
    reach::AffineStepDynamics dyn;
    dyn.A = {{0.0}};
    dyn.B = {1.0};
    dyn.c = {0.0};
    reach::Stepper stepper = [&dyn](const IntervalBox& box,
                                    const std::string& tag,
                                    int) -> reach::StepOutcome {
        reach::StepResult sr = reach::step_affine(dyn, box, {0.9, 1.1}, 0.5);
        reach::StepOutcome out;
        out.children.push_back(
            {sr.span_hull, sr.endpoint, tag.empty() ? "cruise" : tag, 0.0,
             std::nullopt});
        return out;
    };
    reach::ReachConfig cfg;
    cfg.delta = {0.25};
    cfg.steps_per_round = 5;
    cfg.max_steps = 10;
    auto unsafe = reach::UnsafeRegion::box(1, {{0, {100.0, 101.0}}});
    IntervalBox initial({0.0}, {1.0});
    IntervalBox goal({50.0}, {60.0});  // not reached in 10 steps
    for (auto _ : state)
        benchmark::DoNotOptimize(
            reach::algorithm1(initial, unsafe, goal, stepper, cfg));
}
BENCHMARK(bm_algorithm1_drift);

}  // namespace

BENCHMARK_MAIN();
