#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "reachplan/nn.hpp"

using namespace reachplan;
namespace fs = std::filesystem;

namespace {

nn::NeuralNetwork single_layer(std::vector<Vec> w, Vec b, nn::Activation act,
                               nn::OutputScale scale = {-1.0, 1.0}) {
    std::size_t in = w.empty() ? 0 : w[0].size();
    nn::Layer layer{std::move(w), std::move(b), act};
    return nn::NeuralNetwork({layer}, nn::Normalization::identity(in), scale);
}

std::string temp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

/// Independent forward pass working directly off the serialized weight file,
/// sharing no code with NeuralNetwork::forward.
double forward_from_file(const std::string& path, const Vec& x) {
    nlohmann::json j;
    std::ifstream(path) >> j;
    Vec h(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        double lo = j["normalization"]["lo"][k], hi = j["normalization"]["hi"][k];
        h[k] = (x[k] - lo) / (hi - lo);
    }
    for (const auto& layer : j["layers"]) {
        const auto& w = layer["weights"];
        const auto& b = layer["bias"];
        Vec z(b.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = b[i].get<double>();
            for (std::size_t k = 0; k < h.size(); ++k)
                z[i] += w[i][k].get<double>() * h[k];
            std::string act = layer["activation"];
            if (act == "relu") z[i] = std::max(z[i], 0.0);
            else if (act == "tanh") z[i] = std::tanh(z[i]);
            else if (act == "sigmoid") z[i] = 1.0 / (1.0 + std::exp(-z[i]));
        }
        h = z;
    }
    double lo = j["output_scale"]["lo"], hi = j["output_scale"]["hi"];
    return lo + 0.5 * (h[0] + 1.0) * (hi - lo);
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("forward: zero weights and bias give zero") {
    auto net = single_layer({{0.0, 0.0}, {0.0, 0.0}}, {0.0, 0.0},
                            nn::Activation::Linear);
    Vec y = net.forward({3.0, -4.0});
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
}

TEST_CASE("forward: identity layer passes input through") {
    auto net = single_layer({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0},
                            nn::Activation::Linear);
    Vec y = net.forward({1.5, -2.0});
    CHECK(y[0] == doctest::Approx(1.5));
    CHECK(y[1] == doctest::Approx(-2.0));
}

TEST_CASE("forward: dimension mismatch rejected") {
    auto net = single_layer({{1.0, 0.0}}, {0.0}, nn::Activation::Linear);
    CHECK_THROWS(net.forward({1.0}));
}

TEST_CASE("lipschitz bound: diagonal operator norm, Linf") {
    auto net = single_layer({{2.0, 0.0}, {0.0, 3.0}}, {0.0, 0.0},
                            nn::Activation::Linear);
    CHECK(net.lipschitz_bound(nn::Norm::Linf) == doctest::Approx(3.0));
}

TEST_CASE("lipschitz bound: product rule over layers") {
    nn::Layer l1{{{2.0}}, {0.0}, nn::Activation::Relu};
    nn::Layer l2{{{5.0}}, {0.0}, nn::Activation::Tanh};
    nn::NeuralNetwork net({l1, l2}, nn::Normalization::identity(1), {-1.0, 1.0});
    CHECK(net.lipschitz_bound(nn::Norm::Linf) == doctest::Approx(10.0));
    CHECK(net.lipschitz_bound(nn::Norm::L2) == doctest::Approx(10.0));
}

TEST_CASE("train: constant-zero target reaches tiny mse") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        data.inputs.push_back({unit(rng)});
        data.targets.push_back({0.0});
    }
    nn::ArchSpec arch;
    arch.input_dim = 1;
    arch.output_activation = nn::Activation::Tanh;
    nn::HyperParams hp;
    hp.epochs = 300;
    auto res = nn::train(data, arch, hp);
    CHECK(res.final_mse < 1e-4);
}

TEST_CASE("train: linear target f(x)=0.5x is learned") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 400; ++i) {
        double x = unit(rng);
        data.inputs.push_back({x});
        data.targets.push_back({0.5 * x});
    }
    nn::ArchSpec arch;
    arch.input_dim = 1;
    arch.output_activation = nn::Activation::Linear;
    nn::HyperParams hp;
    hp.epochs = 800;
    auto res = nn::train(data, arch, hp);
    CHECK(res.final_mse < 1e-4);
}

TEST_CASE("train determinism: identical seed gives identical weights") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        double x = unit(rng);
        data.inputs.push_back({x});
        data.targets.push_back({std::sin(x)});
    }
    nn::ArchSpec arch;
    arch.input_dim = 1;
    nn::HyperParams hp;
    hp.epochs = 50;
    auto a = nn::train(data, arch, hp);
    auto b = nn::train(data, arch, hp);
    CHECK(a.final_mse == b.final_mse);
    for (std::size_t l = 0; l < a.net.layers().size(); ++l)
        for (std::size_t i = 0; i < a.net.layers()[l].weights.size(); ++i)
            for (std::size_t k = 0; k < a.net.layers()[l].weights[i].size(); ++k)
                CHECK(a.net.layers()[l].weights[i][k] ==
                      b.net.layers()[l].weights[i][k]);
}

TEST_CASE("trained net: lipschitz bound dominates sampled difference "
          "quotients, tanh output stays in (-1,1)") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        Vec x = {unit(rng), unit(rng)};
        data.inputs.push_back(x);
        data.targets.push_back({0.8 * std::sin(3.0 * x[0]) * x[1]});
    }
    nn::ArchSpec arch;
    arch.input_dim = 2;
    auto net = nn::train(data, arch, {}).net;

    double L2 = net.lipschitz_physical(nn::Norm::L2);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        Vec x = {unit(rng), unit(rng)}, y = {unit(rng), unit(rng)};
        double dx = std::hypot(x[0] - y[0], x[1] - y[1]);
        if (dx < 1e-12) continue;
        double df = std::fabs(net.forward_scalar(x) - net.forward_scalar(y));
        worst = std::max(worst, df / dx);
        double raw = net.forward_raw(x)[0];
        CHECK(raw > -1.0);
        CHECK(raw < 1.0);
    }
    CHECK(L2 >= worst);
}

TEST_CASE("box-local lipschitz bound: never above global, still sound") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        Vec x = {unit(rng), unit(rng)};
        data.inputs.push_back(x);
        data.targets.push_back({std::tanh(4.0 * (x[0] - 0.5))});
    }
    nn::ArchSpec arch;
    arch.input_dim = 2;
    auto net = nn::train(data, arch, {}).net;

    IntervalBox box({0.2, 0.3}, {0.35, 0.5});
    double local = net.lipschitz_physical(box, nn::Norm::L2);
    CHECK(local <= net.lipschitz_physical(nn::Norm::L2) + 1e-12);
    std::uniform_real_distribution<double> u0(box.lo(0), box.hi(0));
    std::uniform_real_distribution<double> u1(box.lo(1), box.hi(1));
    for (int i = 0; i < 10000; ++i) {
        Vec x = {u0(rng), u1(rng)}, y = {u0(rng), u1(rng)};
        double dx = std::hypot(x[0] - y[0], x[1] - y[1]);
        if (dx < 1e-12) continue;
        double df = std::fabs(net.forward_scalar(x) - net.forward_scalar(y));
        CHECK(df <= local * dx + 1e-9);
    }
}

TEST_CASE("spectral L2 norm beats Frobenius on a rank-deficient layer") {
    // [[1,1],[1,1]] has spectral norm 2 but Frobenius norm 2; try a matrix
    // where they differ: [[3,0],[4,0]] has spectral norm 5, Frobenius 5 too.
    // [[1,0],[0,1]] differs: spectral 1, Frobenius sqrt(2).
    auto net = single_layer({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0},
                            nn::Activation::Linear);
    CHECK(net.lipschitz_bound(nn::Norm::L2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("save/load round trip preserves forward to 1e-12") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Vec x = {unit(rng), unit(rng), unit(rng)};
        data.inputs.push_back(x);
        data.targets.push_back({x[0] - x[2]});
    }
    nn::ArchSpec arch;
    arch.input_dim = 3;
    arch.output_scale = {-4.0, 3.0};
    auto net = nn::train(data, arch, {}).net;

    std::string path = temp_path("rp_nn_roundtrip.json");
    nn::save_weights(net, path);
    auto back = nn::load_weights(path);
    for (int i = 0; i < 100; ++i) {
        Vec x = {unit(rng), unit(rng), unit(rng)};
        CHECK(net.forward_scalar(x) ==
              doctest::Approx(back.forward_scalar(x)).epsilon(1e-12));
    }
    fs::remove(path);
}

TEST_CASE("saved weight file agrees with an independent matrix-multiply") {
    nn::TrainingDataset data;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Vec x = {unit(rng), unit(rng)};
        data.inputs.push_back(x);
        data.targets.push_back({x[0] * x[1]});
    }
    nn::ArchSpec arch;
    arch.input_dim = 2;
    arch.output_scale = {-4.0, 3.0};
    auto net = nn::train(data, arch, {}).net;

    std::string path = temp_path("rp_nn_independent.json");
    nn::save_weights(net, path);
    for (int i = 0; i < 20; ++i) {
        Vec x = {unit(rng), unit(rng)};
        double u = net.forward_scalar(x);
        CHECK(u == doctest::Approx(forward_from_file(path, x)).epsilon(1e-12));
        CHECK(u >= -4.0);
        CHECK(u <= 3.0);
    }
    fs::remove(path);
}

TEST_CASE("malformed weight files are rejected with context") {
    std::string path = temp_path("rp_nn_malformed.json");

    SUBCASE("mismatched matrix dimensions") {
        std::ofstream(path) << R"({"input_dim":2,"output_dim":1,
          "normalization":{"lo":[0,0],"hi":[1,1]},
          "output_scale":{"lo":-1,"hi":1},
          "layers":[{"weights":[[1.0]],"bias":[0.0,0.0],"activation":"linear"}]})";
        CHECK_THROWS(nn::load_weights(path));
    }
    SUBCASE("missing activation field") {
        std::ofstream(path) << R"({"input_dim":1,"output_dim":1,
          "normalization":{"lo":[0],"hi":[1]},
          "output_scale":{"lo":-1,"hi":1},
          "layers":[{"weights":[[1.0]],"bias":[0.0]}]})";
        CHECK_THROWS_WITH_AS(nn::load_weights(path),
                             doctest::Contains("activation"), std::exception);
    }
    SUBCASE("not json at all") {
        std::ofstream(path) << "plainly not json";
        CHECK_THROWS(nn::load_weights(path));
    }
    fs::remove(path);
}

TEST_CASE("nan loss reports the epoch") {
    nn::TrainingDataset data;
    data.inputs.push_back({1.0});
    data.targets.push_back({1e30});  // absurd target with a huge rate diverges
    nn::ArchSpec arch;
    arch.input_dim = 1;
    arch.output_activation = nn::Activation::Linear;
    nn::HyperParams hp;
    hp.learning_rate = 1e30;
    hp.epochs = 50;
    CHECK_THROWS_WITH_AS(nn::train(data, arch, hp), doctest::Contains("epoch"),
                         std::exception);
}

TEST_SUITE_END();
