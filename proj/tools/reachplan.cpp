// Command-line front end: dataset generation, training, verification,
// falsification, simulation, and the merging safety-window search.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reachplan/config.hpp"
#include "reachplan/hierarchy.hpp"
#include "reachplan/interval.hpp"
#include "reachplan/nn.hpp"
#include "reachplan/reach.hpp"
#include "reachplan/scenario.hpp"
#include "reachplan/sim.hpp"

namespace fs = std::filesystem;
using namespace reachplan;

namespace {

struct Runtime {
    config::RunConfig rc;
    bool left_turn = true;
    scenario::LeftTurnScenario lt;
    scenario::MergingScenario mg;
    reach::AffineStepDynamics dyn;
    reach::UnsafeRegion unsafe;
    IntervalBox initial;
    IntervalBox goal;
    IntervalBox norm_bounds;
    Interval actuator{-1.0, 1.0};
    std::vector<std::string> labels;
};

Runtime make_runtime(config::RunConfig rc) {
    Runtime rt;
    rt.rc = std::move(rc);
    rt.left_turn = rt.rc.scenario.name == "left_turn";
    if (rt.left_turn) {
        rt.lt.params = rt.rc.scenario.left_turn;
        rt.lt.delta_c = rt.rc.scenario.delta_c;
        if (rt.rc.scenario.use_schedule)
            rt.lt.schedule = scenario::LeftTurnScenario::schedule_fig7();
        rt.dyn = rt.lt.dynamics();
        rt.unsafe = scenario::LeftTurnScenario::unsafe_window();
        rt.goal = scenario::LeftTurnScenario::goal_after(
            rt.rc.reach.t0 + rt.rc.horizon() * rt.rc.scenario.delta_c - 1e-6);
        rt.norm_bounds = rt.lt.normalization_bounds();
        rt.actuator = rt.lt.params.actuator;
        rt.labels = scenario::LeftTurnScenario::behavior_labels();
    } else {
        rt.mg.params = rt.rc.scenario.merging;
        rt.mg.delta_c = rt.rc.scenario.delta_c;
        rt.dyn = rt.mg.dynamics();
        rt.unsafe = scenario::merging_band(rt.mg.params.d_th, {80.0, 110.0});
        rt.goal = scenario::MergingScenario::goal_after(rt.mg.params.p_end + 10.0);
        rt.norm_bounds = rt.mg.normalization_bounds();
        rt.actuator = rt.mg.params.actuator;
        rt.labels = scenario::MergingScenario::behavior_labels();
    }
    rt.initial = rt.rc.initial();
    return rt;
}

scenario::RolloutConfig rollout_config(const Runtime& rt) {
    scenario::RolloutConfig cfg;
    cfg.sampling = rt.rc.scenario.sampling
                       ? *rt.rc.scenario.sampling
                       : (rt.left_turn ? rt.lt.default_sampling()
                                       : rt.mg.default_sampling());
    cfg.rollouts = rt.rc.train.rollouts;
    cfg.horizon_steps = rt.rc.train.rollout_horizon;
    cfg.seed = rt.rc.seed;
    return cfg;
}

std::vector<scenario::Sample> make_dataset(const Runtime& rt) {
    auto cfg = rollout_config(rt);
    return rt.left_turn ? scenario::generate_dataset(rt.lt, cfg)
                        : scenario::generate_dataset(rt.mg, cfg);
}

fs::path bundle_path(const Runtime& rt) {
    std::string name = rt.rc.planner.bundle;
    if (name.empty())
        name = rt.rc.planner.kind == "single" ? "single.json" : "planner.json";
    fs::path p = name;
    if (p.is_absolute()) return p;
    fs::path under_out = fs::path(rt.rc.out_dir) / p;
    if (fs::exists(under_out) || !fs::exists(p)) return under_out;
    return p;
}

struct Planner {
    bool single = true;
    nn::NeuralNetwork net;
    hierarchy::HierarchicalPlanner hier;
};

Planner load_planner(const Runtime& rt) {
    Planner pl;
    pl.single = rt.rc.planner.kind == "single";
    fs::path p = bundle_path(rt);
    if (pl.single) {
        pl.net = nn::load_weights(p.string());
    } else {
        pl.hier = hierarchy::load_bundle(p.string());
        if (rt.rc.planner.trigger) pl.hier.trigger = *rt.rc.planner.trigger;
    }
    return pl;
}

sim::ControlFactory control_factory(const Planner& pl) {
    if (pl.single) {
        const nn::NeuralNetwork* net = &pl.net;
        return [net]() -> sim::ControlFn {
            return [net](const Vec& x, int) { return net->forward_scalar(x); };
        };
    }
    const hierarchy::HierarchicalPlanner* hp = &pl.hier;
    return [hp]() -> sim::ControlFn {
        auto ex = std::make_shared<hierarchy::Executor>(*hp);
        return [ex](const Vec& x, int s) { return ex->control(x, s); };
    };
}

reach::ReachSet run_reach(const Runtime& rt, const Planner& pl,
                          const reach::UnsafeRegion& unsafe,
                          reach::RunMetadata* meta) {
    reach::ReachConfig cfg = rt.rc.reach;
    reach::Stepper stepper;
    if (pl.single) {
        cfg.initial_tag = "single";
        stepper = hierarchy::make_single_stepper(pl.net, rt.dyn,
                                                 rt.rc.scenario.delta_c,
                                                 rt.rc.bernstein, rt.actuator);
    } else {
        stepper = hierarchy::make_hierarchical_stepper(
            pl.hier, rt.dyn, rt.rc.scenario.delta_c, rt.rc.bernstein,
            rt.actuator);
    }
    return reach::algorithm1(rt.initial, unsafe, rt.goal, stepper, cfg, meta,
                             &rt.dyn);
}

std::string d2s(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- subcommands ---------------------------------------------------------

int cmd_gen_data(const Runtime& rt) {
    auto data = make_dataset(rt);
    fs::path out = fs::path(rt.rc.out_dir) / "dataset.csv";
    scenario::export_dataset_csv(data, out.string());
    auto hist = scenario::label_histogram(data, rt.labels.size());
    std::cout << "samples: " << data.size() << "\n";
    for (std::size_t k = 0; k < hist.size(); ++k)
        std::cout << rt.labels[k] << ": " << hist[k] << "\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

nn::TrainResult fit_net(const Runtime& rt, const nn::TrainingDataset& data,
                        const nn::OutputScale& scale, std::uint64_t seed) {
    nn::ArchSpec arch;
    arch.input_dim = rt.initial.dim();
    arch.normalization = {rt.norm_bounds.lo(), rt.norm_bounds.hi()};
    arch.output_scale = scale;
    nn::HyperParams hp;
    hp.learning_rate = rt.rc.train.learning_rate;
    hp.epochs = rt.rc.train.epochs;
    hp.batch_size = rt.rc.train.batch_size;
    hp.seed = seed;
    return nn::train(data, arch, hp);
}

int cmd_train(const Runtime& rt) {
    auto data = make_dataset(rt);
    fs::path out = bundle_path(rt);
    fs::create_directories(out.parent_path());
    nn::OutputScale u_scale{rt.actuator.lo, rt.actuator.hi};

    if (rt.rc.planner.kind == "single") {
        nn::TrainingDataset td;
        for (const auto& s : data) {
            td.inputs.push_back(s.state);
            td.targets.push_back({s.u});
        }
        auto res = fit_net(rt, td, u_scale, rt.rc.seed);
        nn::save_weights(res.net, out.string());
        std::cout << "single mse: " << d2s(res.final_mse) << "\n";
        if (res.final_mse > rt.rc.train.mse_threshold)
            std::cout << "warning: mse above threshold "
                      << d2s(rt.rc.train.mse_threshold) << "\n";
        std::cout << "wrote " << out.string() << "\n";
        return 0;
    }

    std::size_t n = rt.labels.size();
    auto regions = rt.rc.planner.regions.value_or(
        hierarchy::HierarchicalPlanner::equal_regions(n));

    nn::TrainingDataset behavior_td;
    std::vector<nn::TrainingDataset> motion_td(n);
    for (const auto& s : data) {
        behavior_td.inputs.push_back(s.state);
        behavior_td.targets.push_back(
            {hierarchy::HierarchicalPlanner::region_center(regions, s.label)});
        motion_td[s.label].inputs.push_back(s.state);
        motion_td[s.label].targets.push_back({s.u});
    }
    for (std::size_t k = 0; k < n; ++k)
        if (motion_td[k].inputs.empty())
            throw std::runtime_error("train: no samples for behavior '" +
                                     rt.labels[k] + "'");

    hierarchy::HierarchicalPlanner planner;
    auto bres = fit_net(rt, behavior_td, {-1.0, 1.0}, rt.rc.seed);
    planner.behavior = bres.net;
    std::cout << "behavior mse: " << d2s(bres.final_mse) << "\n";
    for (std::size_t k = 0; k < n; ++k) {
        auto mres = fit_net(rt, motion_td[k], u_scale, rt.rc.seed + 1 + k);
        planner.motions.push_back(mres.net);
        std::cout << rt.labels[k] << " mse: " << d2s(mres.final_mse) << "\n";
        if (mres.final_mse > rt.rc.train.mse_threshold)
            std::cout << "warning: mse above threshold "
                      << d2s(rt.rc.train.mse_threshold) << "\n";
    }
    planner.decision_regions = regions;
    planner.labels = rt.labels;
    planner.trigger = rt.rc.planner.trigger.value_or(hierarchy::Trigger{});
    hierarchy::save_bundle(planner, out.string());
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_verify(const Runtime& rt) {
    Planner pl = load_planner(rt);
    reach::RunMetadata meta;
    reach::ReachSet rs = run_reach(rt, pl, rt.unsafe, &meta);
    fs::path out = fs::path(rt.rc.out_dir) / "reach.csv";
    reach::export_csv(rs, out.string());
    std::string events;
    for (std::size_t i = 0; i < meta.events.size() && i < 20; ++i) {
        if (i) events += "; ";
        events += meta.events[i];
    }
    config::write_metadata(
        (fs::path(rt.rc.out_dir) / "verify_meta.json").string(),
        {{"verdict", reach::to_string(rs.verdict)},
         {"reason", rs.reason},
         {"steps", std::to_string(meta.steps_completed)},
         {"refinement_events", std::to_string(meta.refinement_events)},
         {"refinement_log", events},
         {"wall_seconds", d2s(meta.wall_seconds)}});
    std::cout << "verdict: " << reach::to_string(rs.verdict);
    if (!rs.reason.empty()) std::cout << " (" << rs.reason << ")";
    std::cout << "\nwrote " << out.string() << "\n";
    return rs.verdict == reach::Verdict::Safe ? 0 : 1;
}

int cmd_falsify(const Runtime& rt, long long samples_override) {
    Planner pl = load_planner(rt);
    sim::FalsifyConfig fc;
    fc.sim.delta_c = rt.rc.scenario.delta_c;
    fc.sim.t0 = rt.rc.reach.t0;
    fc.sim.steps = rt.rc.horizon();
    fc.schedule = rt.rc.falsify.schedule;
    if (samples_override > 0)
        fc.schedule = {static_cast<int>(samples_override)};
    fc.workers = rt.rc.falsify.workers;

    auto res = sim::falsify(rt.initial, rt.dyn, control_factory(pl), rt.unsafe,
                            fc);
    if (res.found) {
        std::cout << "counterexample after " << res.samples_used
                  << " samples, unsafe at step " << res.trace->unsafe_step
                  << "\nx0 =";
        for (double v : res.counterexample) std::cout << " " << d2s(v);
        std::cout << "\n";
        fs::path out = fs::path(rt.rc.out_dir) / "counterexample.csv";
        sim::export_trajectory_csv(*res.trace, out.string());
        std::cout << "wrote " << out.string() << "\n";
    } else {
        std::cout << "none (" << res.samples_used << " samples)\n";
    }
    return 0;
}

int cmd_simulate(const Runtime& rt, long long samples_override) {
    Planner pl = load_planner(rt);
    int n = samples_override > 0 ? static_cast<int>(samples_override) : 100;

    sim::SimConfig sc;
    sc.delta_c = rt.rc.scenario.delta_c;
    sc.t0 = rt.rc.reach.t0;
    sc.steps = rt.rc.horizon();

    for (int i = 1; i <= n; ++i) {
        sim::SimConfig cfg = sc;
        sim::ControlFn ctrl;
        if (pl.single) {
            const nn::NeuralNetwork* net = &pl.net;
            ctrl = [net](const Vec& x, int) { return net->forward_scalar(x); };
            cfg.tag_of = [](int) { return std::string("single"); };
        } else {
            auto ex = std::make_shared<hierarchy::Executor>(pl.hier);
            ctrl = [ex](const Vec& x, int s) { return ex->control(x, s); };
            cfg.tag_of = [ex](int) { return ex->current_label(); };
        }
        auto tr = sim::simulate(rt.dyn, sim::halton_point(i, rt.initial), ctrl,
                                cfg);
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%03d.csv", i);
        sim::export_trajectory_csv(tr, (fs::path(rt.rc.out_dir) / name).string());
    }

    reach::RunMetadata meta;
    reach::ReachSet rs = run_reach(rt, pl, rt.unsafe, &meta);
    auto rep = sim::containment_check(rs, rt.initial, rt.dyn,
                                      control_factory(pl), sc, n);
    std::cout << "trajectories: " << n << "\ncontained: "
              << (rep.trajectories - rep.violations) << "/" << rep.trajectories
              << "\n";
    config::write_metadata(
        (fs::path(rt.rc.out_dir) / "simulate_meta.json").string(),
        {{"trajectories", std::to_string(rep.trajectories)},
         {"violations", std::to_string(rep.violations)},
         {"verdict", reach::to_string(rs.verdict)}});
    return rep.violations == 0 ? 0 : 1;
}

int cmd_merge_window(const Runtime& rt) {
    if (rt.left_turn)
        throw std::runtime_error("config: merge-window needs the merging "
                                 "scenario");
    Planner pl = load_planner(rt);
    // Run the flowpipe to completion against a vacuous unsafe region so the
    // window scan sees full coverage of [0, p_end].
    reach::UnsafeRegion vacuous =
        scenario::merging_band(rt.mg.params.d_th, {-1e6, -1e6 + 1.0});
    reach::RunMetadata meta;
    reach::ReachSet rs = run_reach(rt, pl, vacuous, &meta);
    reach::export_csv(rs, (fs::path(rt.rc.out_dir) / "reach.csv").string());

    if (rs.verdict != reach::Verdict::Safe) {
        std::cout << "no window (reach incomplete: " << rs.reason << ")\n";
        return 1;
    }
    auto window = scenario::merging_unsafe_window(
        rs, rt.mg.params.d_th, rt.mg.params.p_end, 1.0, &rt.dyn);
    if (!window) {
        std::cout << "no window\n";
        return 1;
    }
    std::cout << "window: [" << d2s(window->lo) << ", " << d2s(window->hi)
              << "] at d_th = " << d2s(rt.mg.params.d_th) << "\n";
    config::write_metadata(
        (fs::path(rt.rc.out_dir) / "window_meta.json").string(),
        {{"window_lo", d2s(window->lo)},
         {"window_hi", d2s(window->hi)},
         {"d_th", d2s(rt.mg.params.d_th)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified reachability toolkit for neural planners"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    long long seed_override = -1;
    int workers_override = -1;
    long long samples = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")
            ->required();
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--seed", seed_override, "seed override");
        cmd->add_option("--workers", workers_override, "worker thread count");
        return cmd;
    };
    auto* c_gen = add_common(app.add_subcommand("gen-data", "expert dataset"));
    auto* c_train = add_common(app.add_subcommand("train", "train planner"));
    auto* c_verify = add_common(app.add_subcommand("verify", "reachability"));
    auto* c_falsify = add_common(app.add_subcommand("falsify", "sampling"));
    auto* c_sim = add_common(app.add_subcommand("simulate", "rollouts"));
    auto* c_window =
        add_common(app.add_subcommand("merge-window", "safety window"));
    c_falsify->add_option("--samples", samples, "sample count override");
    c_sim->add_option("--samples", samples, "trajectory count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Runtime rt;
    try {
        config::RunConfig rc = config::load_run_config(config_path);
        if (!out_override.empty()) rc.out_dir = out_override;
        if (seed_override >= 0) rc.seed = static_cast<std::uint64_t>(seed_override);
        if (workers_override > 0) rc.falsify.workers = workers_override;
        rt = make_runtime(std::move(rc));
        fs::create_directories(rt.rc.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (c_gen->parsed()) return cmd_gen_data(rt);
        if (c_train->parsed()) return cmd_train(rt);
        if (c_verify->parsed()) return cmd_verify(rt);
        if (c_falsify->parsed()) return cmd_falsify(rt, samples);
        if (c_sim->parsed()) return cmd_simulate(rt, samples);
        if (c_window->parsed()) return cmd_merge_window(rt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
