#include "reachplan/config.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace reachplan::config {

namespace {

using nlohmann::json;

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::runtime_error(std::string("config: bad value for '") + key +
                                 "'");
    }
}

IntervalBox read_box(const json& j, const char* key) {
    Vec lo, hi;
    read_into(j, "lo", lo);
    read_into(j, "hi", hi);
    try {
        return IntervalBox(lo, hi);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("config: bad box '") + key +
                                 "': " + e.what());
    }
}

Interval read_interval(const json& j, const char* key, Interval fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2)
        throw std::runtime_error(std::string("config: '") + key +
                                 "' must be [lo, hi]");
    return {a.at(0).get<double>(), a.at(1).get<double>()};
}

void parse_scenario(const json& j, ScenarioConfig& sc) {
    read_into(j, "name", sc.name);
    if (sc.name != "left_turn" && sc.name != "merging")
        throw std::runtime_error("config: unknown scenario '" + sc.name + "'");
    read_into(j, "initial_set", sc.initial_set);
    read_into(j, "schedule", sc.use_schedule);
    read_into(j, "delta_c", sc.delta_c);
    read_into(j, "horizon_steps", sc.horizon_steps);
    if (sc.delta_c <= 0.0)
        throw std::runtime_error("config: delta_c must be positive");
    if (j.contains("initial")) sc.custom_initial = read_box(j.at("initial"), "initial");
    if (j.contains("sampling")) sc.sampling = read_box(j.at("sampling"), "sampling");

    if (j.contains("left_turn")) {
        const auto& lt = j.at("left_turn");
        auto& p = sc.left_turn;
        p.actuator = read_interval(lt, "actuator", p.actuator);
        read_into(lt, "a_proceed", p.a_proceed);
        read_into(lt, "v_cap", p.v_cap);
        read_into(lt, "k_v", p.k_v);
        read_into(lt, "proceed_margin", p.proceed_margin);
        read_into(lt, "yield_margin", p.yield_margin);
        read_into(lt, "red_margin", p.red_margin);
        read_into(lt, "a_stop", p.a_stop);
        read_into(lt, "green_s", p.signal.green_s);
        read_into(lt, "yellow_s", p.signal.yellow_s);
        read_into(lt, "red_s", p.signal.red_s);
    }
    if (j.contains("merging")) {
        const auto& mg = j.at("merging");
        auto& p = sc.merging;
        p.actuator = read_interval(mg, "actuator", p.actuator);
        read_into(mg, "d_th", p.d_th);
        read_into(mg, "p_end", p.p_end);
        read_into(mg, "window_center", p.window_center);
        read_into(mg, "gap_margin", p.gap_margin);
        read_into(mg, "brake_offset", p.brake_offset);
        read_into(mg, "k_gap", p.k_gap);
        read_into(mg, "k_v", p.k_v);
        read_into(mg, "v_cruise", p.v_cruise);
        read_into(mg, "v_floor", p.v_floor);
    }
}

void parse_planner(const json& j, PlannerConfig& pc) {
    read_into(j, "kind", pc.kind);
    if (pc.kind != "single" && pc.kind != "hierarchical")
        throw std::runtime_error("config: planner kind must be single or "
                                 "hierarchical, got '" + pc.kind + "'");
    read_into(j, "bundle", pc.bundle);
    if (j.contains("trigger")) {
        const auto& t = j.at("trigger");
        hierarchy::Trigger tr;
        std::string kind = "once";
        read_into(t, "kind", kind);
        if (kind == "once") {
            tr.kind = hierarchy::Trigger::Kind::Once;
        } else if (kind == "every_k_steps") {
            tr.kind = hierarchy::Trigger::Kind::EveryKSteps;
        } else {
            throw std::runtime_error("config: trigger kind must be once or "
                                     "every_k_steps");
        }
        read_into(t, "k", tr.k);
        if (tr.k < 1) throw std::runtime_error("config: trigger k must be >= 1");
        pc.trigger = tr;
    }
    if (j.contains("regions")) {
        std::vector<Interval> regions;
        for (const auto& r : j.at("regions")) {
            if (!r.is_array() || r.size() != 2)
                throw std::runtime_error(
                    "config: regions entries must be [lo, hi]");
            regions.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        }
        pc.regions = std::move(regions);
    }
}

void parse_reach(const json& j, reach::ReachConfig& rc) {
    read_into(j, "delta", rc.delta);
    for (double d : rc.delta)
        if (!(d > 0.0))
            throw std::runtime_error("config: reach delta entries must be > 0");
    read_into(j, "steps_per_round", rc.steps_per_round);
    read_into(j, "growth_gate", rc.growth_gate);
    read_into(j, "growth_floor", rc.growth_floor);
    read_into(j, "epsilon_cap", rc.epsilon_cap);
    read_into(j, "cell_time_budget_s", rc.cell_time_budget_s);
    read_into(j, "max_refine_depth", rc.max_refine_depth);
    read_into(j, "max_steps", rc.max_steps);
    if (rc.steps_per_round < 1 || rc.max_refine_depth < 0 || rc.max_steps < 1)
        throw std::runtime_error("config: bad reach parameters");
}

void parse_bernstein(const json& j, bernstein::BernsteinConfig& bc) {
    read_into(j, "degree", bc.degree);
    read_into(j, "clock_degree", bc.clock_degree);
    read_into(j, "grid_per_dim", bc.grid_per_dim);
    read_into(j, "behavior_grid_per_dim", bc.behavior_grid_per_dim);
    read_into(j, "range_refine", bc.range_refine);
    read_into(j, "clock_dims", bc.clock_dims);
    if (bc.degree < 1 || bc.clock_degree < 1 || bc.grid_per_dim < 2)
        throw std::runtime_error("config: bad bernstein parameters");
}

void parse_train(const json& j, TrainConfig& tc) {
    read_into(j, "learning_rate", tc.learning_rate);
    read_into(j, "epochs", tc.epochs);
    read_into(j, "batch_size", tc.batch_size);
    read_into(j, "rollouts", tc.rollouts);
    read_into(j, "rollout_horizon", tc.rollout_horizon);
    read_into(j, "mse_threshold", tc.mse_threshold);
}

void parse_falsify(const json& j, FalsifyParams& fp) {
    read_into(j, "schedule", fp.schedule);
    read_into(j, "workers", fp.workers);
    int prev = 0;
    for (int c : fp.schedule) {
        if (c <= prev)
            throw std::runtime_error(
                "config: falsify schedule must be ascending");
        prev = c;
    }
}

}  // namespace

IntervalBox RunConfig::initial() const {
    if (scenario.custom_initial) return *scenario.custom_initial;
    const std::string& s = scenario.initial_set;
    if (scenario.name == "left_turn") {
        if (s == "fig5") return scenario::LeftTurnScenario::initial_fig5();
        if (s == "fig6") return scenario::LeftTurnScenario::initial_fig6();
        if (s == "fig7") return scenario::LeftTurnScenario::initial_fig7();
    } else {
        if (s == "fig9") return scenario::MergingScenario::initial_fig9();
    }
    throw std::runtime_error("config: unknown initial set '" + s +
                             "' for scenario " + scenario.name);
}

int RunConfig::horizon() const {
    if (scenario.horizon_steps > 0) return scenario.horizon_steps;
    return scenario.name == "left_turn" ? 20 : 40;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }

    RunConfig rc;
    if (j.contains("scenario")) parse_scenario(j.at("scenario"), rc.scenario);
    if (j.contains("planner")) parse_planner(j.at("planner"), rc.planner);
    if (j.contains("train")) parse_train(j.at("train"), rc.train);
    if (j.contains("reach")) parse_reach(j.at("reach"), rc.reach);
    if (j.contains("bernstein")) parse_bernstein(j.at("bernstein"), rc.bernstein);
    if (j.contains("falsify")) parse_falsify(j.at("falsify"), rc.falsify);
    read_into(j, "seed", rc.seed);
    read_into(j, "out_dir", rc.out_dir);

    // Scenario-shaped defaults for anything not given explicitly.
    std::size_t dim = rc.scenario.name == "left_turn" ? 5 : 4;
    if (rc.reach.delta.empty()) {
        rc.reach.delta = rc.scenario.name == "left_turn"
                             ? Vec{0.5, 0.25, 100.0, 100.0, 100.0}
                             : Vec{0.5, 0.25, 0.25, 0.25};
    }
    if (rc.reach.delta.size() != dim)
        throw std::runtime_error("config: reach delta has wrong dimension");
    rc.reach.delta_c = rc.scenario.delta_c;
    rc.reach.t0 = rc.scenario.name == "left_turn" ? 6.0 : 0.0;
    if (!j.contains("reach") || !j.at("reach").contains("max_steps"))
        rc.reach.max_steps = rc.horizon();
    if (rc.bernstein.clock_dims.empty() && rc.scenario.name == "left_turn")
        rc.bernstein.clock_dims = {scenario::LT_TMIN, scenario::LT_TMAX,
                                   scenario::LT_T};
    if (!j.contains("reach") || !j.at("reach").contains("growth_floor"))
        rc.reach.growth_floor = 0.25;
    return rc;
}

void write_metadata(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& kv) {
    nlohmann::json j;
    for (const auto& [k, v] : kv) j[k] = v;
    auto now = std::chrono::system_clock::now();
    j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                         now.time_since_epoch())
                         .count();
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_metadata: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace reachplan::config
