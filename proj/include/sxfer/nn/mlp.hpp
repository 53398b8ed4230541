#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sxfer/random.hpp"

namespace sxfer::nn {

enum class Activation { ReLU, Sigmoid, Linear, Softplus };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& text);

struct LayerShape {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    Activation activation = Activation::ReLU;
    bool operator==(const LayerShape&) const = default;
};

using Architecture = std::vector<LayerShape>;

// input -> hidden_layers x hidden_width (ReLU) -> output with the given activation.
Architecture make_architecture(std::size_t input, std::size_t hidden_width, std::size_t hidden_layers,
                               std::size_t output, Activation output_activation);

// Throws ConfigError if the layer dimensions do not chain.
void validate_architecture(const Architecture& arch);

// Hash of every layer shape and activation.
std::string architecture_fingerprint(const Architecture& arch);
// Hash of the hidden layers and the output layer's dimensions, ignoring the
// output activation. Two networks with equal trunk fingerprints can exchange
// any hidden layer.
std::string trunk_fingerprint(const Architecture& arch);

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& doc);

struct DenseLayer {
    Eigen::MatrixXd weights;  // fan_out x fan_in
    Eigen::VectorXd biases;   // fan_out
    Activation activation = Activation::ReLU;

    LayerShape shape() const {
        return {static_cast<std::size_t>(weights.cols()), static_cast<std::size_t>(weights.rows()), activation};
    }
    bool operator==(const DenseLayer& other) const;
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    // Raw inputs (nm) are multiplied by this before the first layer.
    double input_scale = 1.0 / 70.0;
    std::uint64_t seed = 0;
    nlohmann::json provenance = nlohmann::json::object();

    Architecture architecture() const;
    std::string fingerprint() const { return architecture_fingerprint(architecture()); }
    std::size_t hidden_count() const { return layers.empty() ? 0 : layers.size() - 1; }
    std::size_t input_width() const { return static_cast<std::size_t>(layers.front().weights.cols()); }
    std::size_t output_width() const { return static_cast<std::size_t>(layers.back().weights.rows()); }
};

// Weights ~ Normal(0, 2 / fan_in) drawn from substream(seed, stream); zero biases.
DenseLayer init_layer(const LayerShape& shape, std::uint64_t seed, std::uint64_t stream);
// Layer i uses stream i.
MlpModel init_network(const Architecture& arch, std::uint64_t seed, double input_scale = 1.0 / 70.0);

// Inverted dropout on hidden activations. Fixed masks (already scaled by
// 1/keep_prob) take precedence over sampling; they are used for gradient checks.
struct Dropout {
    double keep_prob = 1.0;
    Rng* rng = nullptr;
    const std::vector<Eigen::MatrixXd>* fixed_masks = nullptr;

    bool active() const { return fixed_masks != nullptr || keep_prob < 1.0; }
};

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;          // input to each layer, after dropout
    std::vector<Eigen::MatrixXd> pre_activations;  // W x + b per layer
    std::vector<Eigen::MatrixXd> masks;            // per hidden layer; empty without dropout
    Eigen::MatrixXd output;
};

// Ordered layers evaluated in sequence: a plain model, or a multi-task trunk
// followed by one head.
using LayerPath = std::vector<const DenseLayer*>;

LayerPath path_of(const MlpModel& model);

// `input` is already scaled; one example per column. Throws NumericalError
// naming the layer if an activation becomes non-finite.
Eigen::MatrixXd forward_path(const LayerPath& path, const Eigen::MatrixXd& input, const Dropout* dropout = nullptr,
                             ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Exact gradient of batch_loss with respect to every parameter on the path.
Gradients backward_path(const LayerPath& path, const ForwardCache& cache, const Eigen::MatrixXd& target, double l1,
                        double l2);

// l2 * sum(w^2) + l1 * sum(|w|) over weights; biases are not penalized.
double penalty(const LayerPath& path, double l1, double l2);

// Mean squared error over points and examples.
double mse(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target);

// Eval-mode forward pass on raw inputs.
Eigen::MatrixXd predict(const MlpModel& model, const Eigen::MatrixXd& raw_input);
Eigen::VectorXd forward(const MlpModel& model, std::span<const double> raw_input);
// Train-mode forward pass on raw inputs.
ForwardCache forward_train(const MlpModel& model, const Eigen::MatrixXd& raw_input, const Dropout& dropout);

// mse(output, target) + penalty(model).
double loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target, const MlpModel& model, double l1,
            double l2);
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& target, double l1,
                   double l2);

}  // namespace sxfer::nn
