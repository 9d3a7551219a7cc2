#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reachplan/interval.hpp"

namespace reachplan::nn {

enum class Activation { Relu, Tanh, Sigmoid, Linear };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
double apply_activation(Activation a, double z);
double activation_derivative(Activation a, double z);
/// Lipschitz factor of the activation itself (relu/tanh/linear 1, sigmoid 1/4).
double activation_lipschitz(Activation a);

enum class Norm { L2, Linf };

struct Layer {
    std::vector<Vec> weights;  // [out][in]
    Vec bias;                  // [out]
    Activation activation = Activation::Linear;

    std::size_t out_dim() const { return weights.size(); }
    std::size_t in_dim() const { return weights.empty() ? 0 : weights[0].size(); }
};

/// Per-dimension affine input map onto [0,1]; identity when lo=0, hi=1.
struct Normalization {
    Vec lo, hi;

    static Normalization identity(std::size_t n) {
        return {Vec(n, 0.0), Vec(n, 1.0)};
    }
    Vec apply(const Vec& x) const;
    double scale(std::size_t j) const { return 1.0 / (hi[j] - lo[j]); }
};

/// Affine map of a raw (-1,1) output onto an actuator range [lo, hi].
/// Identity when lo=-1, hi=1.
struct OutputScale {
    double lo = -1.0;
    double hi = 1.0;

    double apply(double y) const { return lo + 0.5 * (y + 1.0) * (hi - lo); }
    double unapply(double u) const { return 2.0 * (u - lo) / (hi - lo) - 1.0; }
    double gain() const { return 0.5 * (hi - lo); }
};

/// Small feed-forward network with stored input normalization and output
/// scaling. Immutable after construction; safe to share across workers.
class NeuralNetwork {
public:
    NeuralNetwork() = default;
    NeuralNetwork(std::vector<Layer> layers, Normalization norm, OutputScale scale);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    const std::vector<Layer>& layers() const { return layers_; }
    const Normalization& normalization() const { return norm_; }
    const OutputScale& output_scale() const { return scale_; }

    /// Normalized input -> layers -> output scale.
    Vec forward(const Vec& x) const;
    /// forward() for 1-output networks.
    double forward_scalar(const Vec& x) const;
    /// Raw last-layer activation outputs, before output scaling.
    Vec forward_raw(const Vec& x) const;

    /// Upper bound on the Lipschitz constant of the raw network in
    /// normalized input coordinates: product over layers of operator norm
    /// times the activation factor. L2 uses the Frobenius norm, a sound
    /// upper bound on the spectral norm.
    double lipschitz_bound(Norm norm) const;
    /// Lipschitz bound of forward() in physical input coordinates,
    /// accounting for the normalization scales and the output-scale gain.
    double lipschitz_physical(Norm norm) const;
    /// Tighter Lipschitz bound of forward() local to a box of physical
    /// inputs: pre-activations are propagated with interval arithmetic and
    /// each neuron contributes its maximum activation slope over the box, so
    /// saturated neurons stop inflating the bound. Per-dimension input
    /// scales are folded into the first layer. Never exceeds the global
    /// bound.
    double lipschitz_physical(const IntervalBox& box, Norm norm) const;

private:
    std::vector<Layer> layers_;
    Normalization norm_;
    OutputScale scale_;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
};

struct TrainingDataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;  // physical units; output scale is inverted for training
};

struct ArchSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden = {10, 10};
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Tanh;
    std::size_t output_dim = 1;
    Normalization normalization;  // empty lo/hi means identity
    OutputScale output_scale;
};

struct HyperParams {
    double learning_rate = 0.05;
    std::size_t epochs = 400;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
};

struct TrainResult {
    NeuralNetwork net;
    double final_mse = 0.0;  // in raw output units (output scale inverted)
};

/// Mini-batch SGD on mean squared error. Deterministic given the seed.
/// Throws on NaN loss, naming the epoch.
TrainResult train(const TrainingDataset& data, const ArchSpec& arch,
                  const HyperParams& hyper);

/// Weight file round trip. Numbers are written with 17 significant digits.
void save_weights(const NeuralNetwork& net, const std::string& path);
NeuralNetwork load_weights(const std::string& path);

std::string to_json(const NeuralNetwork& net);
NeuralNetwork from_json(const std::string& text);

}  // namespace reachplan::nn
