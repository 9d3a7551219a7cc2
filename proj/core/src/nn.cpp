#include "reachplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace reachplan::nn {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "linear";
}

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Linear: return z;
    }
    return z;
}

double activation_derivative(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Sigmoid: {
            double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::Linear: return 1.0;
    }
    return 1.0;
}

double activation_lipschitz(Activation a) {
    return a == Activation::Sigmoid ? 0.25 : 1.0;
}

Vec Normalization::apply(const Vec& x) const {
    Vec y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        y[j] = (x[j] - lo[j]) * scale(j);
    return y;
}

NeuralNetwork::NeuralNetwork(std::vector<Layer> layers, Normalization norm,
                             OutputScale scale)
    : layers_(std::move(layers)), norm_(std::move(norm)), scale_(scale) {
    if (layers_.empty()) throw std::invalid_argument("NeuralNetwork: no layers");
    input_dim_ = layers_.front().in_dim();
    output_dim_ = layers_.back().out_dim();
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
        if (layers_[k].out_dim() != layers_[k + 1].in_dim())
            throw std::invalid_argument("NeuralNetwork: layer dims do not chain");
    }
    for (const auto& l : layers_) {
        if (l.bias.size() != l.out_dim())
            throw std::invalid_argument("NeuralNetwork: bias size mismatch");
        for (const auto& row : l.weights) {
            if (row.size() != l.in_dim())
                throw std::invalid_argument("NeuralNetwork: ragged weight matrix");
            for (double w : row)
                if (!std::isfinite(w))
                    throw std::invalid_argument("NeuralNetwork: non-finite weight");
        }
        for (double b : l.bias)
            if (!std::isfinite(b))
                throw std::invalid_argument("NeuralNetwork: non-finite bias");
    }
    if (norm_.lo.empty()) norm_ = Normalization::identity(input_dim_);
    if (norm_.lo.size() != input_dim_ || norm_.hi.size() != input_dim_)
        throw std::invalid_argument("NeuralNetwork: normalization dim mismatch");
    for (std::size_t j = 0; j < input_dim_; ++j)
        if (norm_.hi[j] == norm_.lo[j])
            throw std::invalid_argument("NeuralNetwork: zero normalization scale");
}

static Vec layer_eval(const Layer& l, const Vec& x) {
    Vec y(l.out_dim());
    for (std::size_t i = 0; i < l.out_dim(); ++i) {
        double z = l.bias[i];
        const Vec& row = l.weights[i];
        for (std::size_t j = 0; j < row.size(); ++j) z += row[j] * x[j];
        y[i] = apply_activation(l.activation, z);
    }
    return y;
}

Vec NeuralNetwork::forward_raw(const Vec& x) const {
    if (x.size() != input_dim_)
        throw std::invalid_argument("forward: input dim mismatch");
    Vec h = norm_.apply(x);
    for (const auto& l : layers_) h = layer_eval(l, h);
    return h;
}

Vec NeuralNetwork::forward(const Vec& x) const {
    Vec y = forward_raw(x);
    for (double& v : y) v = scale_.apply(v);
    return y;
}

double NeuralNetwork::forward_scalar(const Vec& x) const {
    if (output_dim_ != 1)
        throw std::logic_error("forward_scalar: network is not scalar-output");
    return forward(x)[0];
}

static double operator_norm(const std::vector<Vec>& W, Norm norm) {
    if (norm == Norm::Linf) {
        double m = 0.0;
        for (const auto& row : W) {
            double s = 0.0;
            for (double w : row) s += std::fabs(w);
            m = std::max(m, s);
        }
        return m;
    }
    // Spectral norm: sqrt of the largest eigenvalue of W^T W, computed with
    // the cyclic Jacobi method (matrices here are at most ~10x10). A hair of
    // slack covers floating-point error so the bound stays on the safe side.
    std::size_t n = W[0].size();
    std::vector<Vec> G(n, Vec(n, 0.0));
    double frob = 0.0;
    for (const auto& row : W)
        for (double w : row) frob += w * w;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (const auto& row : W) G[i][j] += row[i] * row[j];
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += G[p][q] * G[p][q];
        if (off < 1e-24 * frob * frob || off == 0.0) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (G[p][q] == 0.0) continue;
                double theta = 0.5 * std::atan2(2.0 * G[p][q], G[q][q] - G[p][p]);
                double c = std::cos(theta), s2 = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    double gpk = G[p][k], gqk = G[q][k];
                    G[p][k] = c * gpk - s2 * gqk;
                    G[q][k] = s2 * gpk + c * gqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double gkp = G[k][p], gkq = G[k][q];
                    G[k][p] = c * gkp - s2 * gkq;
                    G[k][q] = s2 * gkp + c * gkq;
                }
            }
    }
    double lmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) lmax = std::max(lmax, G[i][i]);
    return std::min(std::sqrt(frob), std::sqrt(lmax) * (1.0 + 1e-9));
}

double NeuralNetwork::lipschitz_bound(Norm norm) const {
    double L = 1.0;
    for (const auto& l : layers_)
        L *= operator_norm(l.weights, norm) * activation_lipschitz(l.activation);
    return L;
}

double NeuralNetwork::lipschitz_physical(Norm norm) const {
    double smax = 0.0;
    for (std::size_t j = 0; j < input_dim_; ++j)
        smax = std::max(smax, std::fabs(norm_.scale(j)));
    return lipschitz_bound(norm) * smax * scale_.gain();
}

// Maximum activation slope over a pre-activation interval [l, u].
static double activation_slope(Activation a, double l, double u) {
    switch (a) {
        case Activation::Relu:
            return u <= 0.0 ? 0.0 : 1.0;
        case Activation::Tanh: {
            // sech^2 peaks at 0 and decays monotonically with |z|.
            double z = (l > 0.0) ? l : (u < 0.0 ? -u : 0.0);
            double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Sigmoid: {
            double z = (l > 0.0) ? l : (u < 0.0 ? -u : 0.0);
            double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::Linear:
            return 1.0;
    }
    return 1.0;
}

double NeuralNetwork::lipschitz_physical(const IntervalBox& box,
                                         Norm norm) const {
    if (box.dim() != input_dim_)
        throw std::invalid_argument("lipschitz_physical: box dim mismatch");
    // Current activation intervals, starting from the normalized inputs.
    std::vector<Interval> act(input_dim_);
    for (std::size_t j = 0; j < input_dim_; ++j) {
        double s = norm_.scale(j);
        double a = (box.lo(j) - norm_.lo[j]) * s;
        double b = (box.hi(j) - norm_.lo[j]) * s;
        act[j] = {std::min(a, b), std::max(a, b)};
    }

    double L = 1.0;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        std::vector<Interval> z(l.out_dim());
        for (std::size_t i = 0; i < l.out_dim(); ++i) {
            Interval zi = Interval::point(l.bias[i]);
            for (std::size_t j = 0; j < l.in_dim(); ++j)
                zi = zi + act[j] * l.weights[i][j];
            z[i] = zi;
        }
        // Row-scale by the per-neuron slope bound; fold the input scales
        // into the first layer's columns.
        std::vector<Vec> M(l.out_dim(), Vec(l.in_dim()));
        for (std::size_t i = 0; i < l.out_dim(); ++i) {
            double d = activation_slope(l.activation, z[i].lo, z[i].hi);
            for (std::size_t j = 0; j < l.in_dim(); ++j) {
                double w = l.weights[i][j] * d;
                if (li == 0) w *= norm_.scale(j);
                M[i][j] = w;
            }
        }
        L *= operator_norm(M, norm);
        // All supported activations are monotone.
        act.assign(z.size(), Interval{});
        for (std::size_t k = 0; k < z.size(); ++k)
            act[k] = {apply_activation(l.activation, z[k].lo),
                      apply_activation(l.activation, z[k].hi)};
    }
    return std::min(L * scale_.gain(), lipschitz_physical(norm));
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const TrainingDataset& data, const ArchSpec& arch,
                  const HyperParams& hyper) {
    if (data.inputs.empty()) throw std::invalid_argument("train: empty dataset");
    if (data.inputs.size() != data.targets.size())
        throw std::invalid_argument("train: inputs/targets length mismatch");
    if (data.inputs[0].size() != arch.input_dim)
        throw std::invalid_argument("train: arch input dim does not match data");
    if (data.targets[0].size() != arch.output_dim)
        throw std::invalid_argument("train: arch output dim does not match data");

    Normalization norm = arch.normalization;
    if (norm.lo.empty()) norm = Normalization::identity(arch.input_dim);

    std::mt19937_64 rng(hyper.seed);

    std::vector<Layer> layers;
    std::vector<std::size_t> dims;
    dims.push_back(arch.input_dim);
    for (std::size_t h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.output_dim);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Layer l;
        l.activation = (k + 2 == dims.size()) ? arch.output_activation
                                              : arch.hidden_activation;
        double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        l.weights.assign(dims[k + 1], Vec(dims[k]));
        l.bias.assign(dims[k + 1], 0.0);
        for (auto& row : l.weights)
            for (double& w : row) w = dist(rng);
        layers.push_back(std::move(l));
    }

    const std::size_t n_samples = data.inputs.size();
    const std::size_t n_layers = layers.size();

    // Precompute normalized inputs and raw-space targets.
    std::vector<Vec> xs(n_samples), ts(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Normalization nm = norm;
        xs[s] = nm.apply(data.inputs[s]);
        ts[s].resize(arch.output_dim);
        for (std::size_t i = 0; i < arch.output_dim; ++i)
            ts[s][i] = arch.output_scale.unapply(data.targets[s][i]);
    }

    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), 0);

    std::vector<Vec> z(n_layers), a(n_layers + 1), delta(n_layers);
    double epoch_mse = 0.0;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        epoch_mse = 0.0;
        for (std::size_t start = 0; start < n_samples; start += hyper.batch_size) {
            std::size_t end = std::min(start + hyper.batch_size, n_samples);
            double batch = static_cast<double>(end - start);

            std::vector<std::vector<Vec>> gW(n_layers);
            std::vector<Vec> gb(n_layers);
            for (std::size_t k = 0; k < n_layers; ++k) {
                gW[k].assign(layers[k].out_dim(), Vec(layers[k].in_dim(), 0.0));
                gb[k].assign(layers[k].out_dim(), 0.0);
            }

            for (std::size_t idx = start; idx < end; ++idx) {
                const Vec& x = xs[order[idx]];
                const Vec& t = ts[order[idx]];

                a[0] = x;
                for (std::size_t k = 0; k < n_layers; ++k) {
                    const Layer& l = layers[k];
                    z[k].assign(l.out_dim(), 0.0);
                    a[k + 1].resize(l.out_dim());
                    for (std::size_t i = 0; i < l.out_dim(); ++i) {
                        double s = l.bias[i];
                        for (std::size_t j = 0; j < l.in_dim(); ++j)
                            s += l.weights[i][j] * a[k][j];
                        z[k][i] = s;
                        a[k + 1][i] = apply_activation(l.activation, s);
                    }
                }

                delta[n_layers - 1].resize(layers[n_layers - 1].out_dim());
                for (std::size_t i = 0; i < t.size(); ++i) {
                    double err = a[n_layers][i] - t[i];
                    epoch_mse += err * err;
                    delta[n_layers - 1][i] =
                        err * activation_derivative(layers[n_layers - 1].activation,
                                                    z[n_layers - 1][i]);
                }
                for (std::size_t k = n_layers - 1; k-- > 0;) {
                    const Layer& up = layers[k + 1];
                    delta[k].assign(layers[k].out_dim(), 0.0);
                    for (std::size_t j = 0; j < layers[k].out_dim(); ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < up.out_dim(); ++i)
                            s += up.weights[i][j] * delta[k + 1][i];
                        delta[k][j] =
                            s * activation_derivative(layers[k].activation, z[k][j]);
                    }
                }
                for (std::size_t k = 0; k < n_layers; ++k) {
                    for (std::size_t i = 0; i < layers[k].out_dim(); ++i) {
                        gb[k][i] += delta[k][i];
                        for (std::size_t j = 0; j < layers[k].in_dim(); ++j)
                            gW[k][i][j] += delta[k][i] * a[k][j];
                    }
                }
            }

            double step = hyper.learning_rate / batch;
            for (std::size_t k = 0; k < n_layers; ++k) {
                for (std::size_t i = 0; i < layers[k].out_dim(); ++i) {
                    layers[k].bias[i] -= step * gb[k][i];
                    for (std::size_t j = 0; j < layers[k].in_dim(); ++j)
                        layers[k].weights[i][j] -= step * gW[k][i][j];
                }
            }
        }
        epoch_mse /= static_cast<double>(n_samples);
        if (!std::isfinite(epoch_mse))
            throw std::runtime_error("train: loss diverged (NaN) at epoch " +
                                     std::to_string(epoch));
    }

    TrainResult result;
    result.net = NeuralNetwork(std::move(layers), norm, arch.output_scale);
    result.final_mse = epoch_mse;
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

static std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

static std::string vec_to_json(const Vec& v) {
    std::string s = "[";
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (j) s += ", ";
        s += fmt17(v[j]);
    }
    return s + "]";
}

std::string to_json(const NeuralNetwork& net) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"input_dim\": " << net.input_dim() << ",\n";
    os << "  \"output_dim\": " << net.output_dim() << ",\n";
    os << "  \"normalization\": {\"lo\": " << vec_to_json(net.normalization().lo)
       << ", \"hi\": " << vec_to_json(net.normalization().hi) << "},\n";
    os << "  \"output_scale\": {\"lo\": " << fmt17(net.output_scale().lo)
       << ", \"hi\": " << fmt17(net.output_scale().hi) << "},\n";
    os << "  \"layers\": [\n";
    const auto& layers = net.layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
        os << "    {\"activation\": \"" << to_string(layers[k].activation)
           << "\", \"bias\": " << vec_to_json(layers[k].bias)
           << ", \"weights\": [";
        for (std::size_t i = 0; i < layers[k].weights.size(); ++i) {
            if (i) os << ", ";
            os << vec_to_json(layers[k].weights[i]);
        }
        os << "]}" << (k + 1 < layers.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    return os.str();
}

static Vec parse_vec(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array())
        throw std::runtime_error("weight file: field '" + field +
                                 "' is not an array");
    Vec v;
    for (const auto& e : j) v.push_back(e.get<double>());
    return v;
}

NeuralNetwork from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("weight file: ") + e.what());
    }
    for (const char* field : {"input_dim", "output_dim", "layers"})
        if (!j.contains(field))
            throw std::runtime_error(std::string("weight file: missing field '") +
                                     field + "'");

    std::vector<Layer> layers;
    for (const auto& jl : j.at("layers")) {
        if (!jl.contains("activation"))
            throw std::runtime_error(
                "weight file: missing field 'activation' in layer " +
                std::to_string(layers.size()));
        Layer l;
        l.activation = activation_from_string(jl.at("activation").get<std::string>());
        l.bias = parse_vec(jl.at("bias"), "bias");
        for (const auto& row : jl.at("weights"))
            l.weights.push_back(parse_vec(row, "weights"));
        if (!l.weights.empty())
            for (const auto& row : l.weights)
                if (row.size() != l.weights[0].size())
                    throw std::runtime_error(
                        "weight file: ragged weight matrix in layer " +
                        std::to_string(layers.size()));
        if (l.bias.size() != l.weights.size())
            throw std::runtime_error(
                "weight file: bias/weights dim mismatch in layer " +
                std::to_string(layers.size()));
        layers.push_back(std::move(l));
    }
    if (layers.empty()) throw std::runtime_error("weight file: no layers");

    Normalization norm;
    if (j.contains("normalization")) {
        norm.lo = parse_vec(j.at("normalization").at("lo"), "normalization.lo");
        norm.hi = parse_vec(j.at("normalization").at("hi"), "normalization.hi");
    }
    OutputScale scale;
    if (j.contains("output_scale")) {
        scale.lo = j.at("output_scale").at("lo").get<double>();
        scale.hi = j.at("output_scale").at("hi").get<double>();
    }

    NeuralNetwork net(std::move(layers), norm, scale);
    if (net.input_dim() != j.at("input_dim").get<std::size_t>())
        throw std::runtime_error("weight file: input_dim does not match layers");
    if (net.output_dim() != j.at("output_dim").get<std::size_t>())
        throw std::runtime_error("weight file: output_dim does not match layers");
    return net;
}

void save_weights(const NeuralNetwork& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_weights: cannot open " + path);
    os << to_json(net);
}

NeuralNetwork load_weights(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_weights: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

}  // namespace reachplan::nn
