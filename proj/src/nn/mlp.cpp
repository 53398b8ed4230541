#include "sxfer/nn/mlp.hpp"

#include <cmath>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"

namespace sxfer::nn {

namespace {

void apply_activation(Activation act, Eigen::MatrixXd& z) {
    switch (act) {
        case Activation::ReLU: z = z.cwiseMax(0.0); break;
        case Activation::Sigmoid: z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
        case Activation::Softplus:
            z = z.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
            break;
        case Activation::Linear: break;
    }
}

// Multiplies `grad` in place by the activation derivative at pre-activation z.
void scale_by_derivative(Activation act, const Eigen::MatrixXd& z, Eigen::MatrixXd& grad) {
    switch (act) {
        case Activation::ReLU: grad = grad.cwiseProduct((z.array() > 0.0).cast<double>().matrix()); break;
        case Activation::Sigmoid:
            grad = grad.cwiseProduct(z.unaryExpr([](double v) {
                const double s = 1.0 / (1.0 + std::exp(-v));
                return s * (1.0 - s);
            }));
            break;
        case Activation::Softplus:
            grad = grad.cwiseProduct(z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
            break;
        case Activation::Linear: break;
    }
}

std::string shapes_text(const Architecture& arch, bool with_output_activation) {
    std::string text;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        text += std::to_string(arch[i].fan_in) + "x" + std::to_string(arch[i].fan_out);
        if (i + 1 < arch.size() || with_output_activation) text += ":" + to_string(arch[i].activation);
        text += ";";
    }
    return text;
}

}  // namespace

std::string to_string(Activation activation) {
    switch (activation) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
        case Activation::Softplus: return "softplus";
    }
    return "linear";
}

Activation activation_from_string(const std::string& text) {
    if (text == "relu") return Activation::ReLU;
    if (text == "sigmoid") return Activation::Sigmoid;
    if (text == "linear") return Activation::Linear;
    if (text == "softplus") return Activation::Softplus;
    throw ConfigError("unknown activation '" + text + "'");
}

Architecture make_architecture(std::size_t input, std::size_t hidden_width, std::size_t hidden_layers,
                               std::size_t output, Activation output_activation) {
    Architecture arch;
    std::size_t fan_in = input;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        arch.push_back({fan_in, hidden_width, Activation::ReLU});
        fan_in = hidden_width;
    }
    arch.push_back({fan_in, output, output_activation});
    return arch;
}

void validate_architecture(const Architecture& arch) {
    if (arch.empty()) throw ConfigError("architecture has no layers");
    for (std::size_t i = 0; i < arch.size(); ++i) {
        if (arch[i].fan_in == 0 || arch[i].fan_out == 0) {
            throw ConfigError("layer " + std::to_string(i) + " has a zero dimension");
        }
        if (i > 0 && arch[i].fan_in != arch[i - 1].fan_out) {
            throw ConfigError("layer " + std::to_string(i) + " fan_in " + std::to_string(arch[i].fan_in) +
                              " does not match previous fan_out " + std::to_string(arch[i - 1].fan_out));
        }
    }
}

std::string architecture_fingerprint(const Architecture& arch) {
    return sha256_hex("mlp:" + shapes_text(arch, true)).substr(0, 16);
}

std::string trunk_fingerprint(const Architecture& arch) {
    return sha256_hex("trunk:" + shapes_text(arch, false)).substr(0, 16);
}

nlohmann::json architecture_to_json(const Architecture& arch) {
    auto out = nlohmann::json::array();
    for (const auto& s : arch) {
        out.push_back({{"fan_in", s.fan_in}, {"fan_out", s.fan_out}, {"activation", to_string(s.activation)}});
    }
    return out;
}

Architecture architecture_from_json(const nlohmann::json& doc) {
    Architecture arch;
    try {
        for (const auto& s : doc) {
            arch.push_back({s.at("fan_in").get<std::size_t>(), s.at("fan_out").get<std::size_t>(),
                            activation_from_string(s.at("activation").get<std::string>())});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("architecture: ") + e.what());
    }
    validate_architecture(arch);
    return arch;
}

bool DenseLayer::operator==(const DenseLayer& other) const {
    return activation == other.activation && weights.rows() == other.weights.rows() &&
           weights.cols() == other.weights.cols() && biases.size() == other.biases.size() &&
           weights == other.weights && biases == other.biases;
}

Architecture MlpModel::architecture() const {
    Architecture arch;
    for (const auto& layer : layers) arch.push_back(layer.shape());
    return arch;
}

DenseLayer init_layer(const LayerShape& shape, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(substream(seed, stream));
    const double sigma = std::sqrt(2.0 / static_cast<double>(shape.fan_in));
    DenseLayer layer;
    layer.activation = shape.activation;
    layer.weights.resize(static_cast<Eigen::Index>(shape.fan_out), static_cast<Eigen::Index>(shape.fan_in));
    // Row-major draw order so the stream maps to the serialized layout.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = sigma * rng.normal();
    }
    layer.biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.fan_out));
    return layer;
}

MlpModel init_network(const Architecture& arch, std::uint64_t seed, double input_scale) {
    validate_architecture(arch);
    MlpModel model;
    model.seed = seed;
    model.input_scale = input_scale;
    for (std::size_t i = 0; i < arch.size(); ++i) model.layers.push_back(init_layer(arch[i], seed, i));
    return model;
}

LayerPath path_of(const MlpModel& model) {
    LayerPath path;
    for (const auto& layer : model.layers) path.push_back(&layer);
    return path;
}

Eigen::MatrixXd forward_path(const LayerPath& path, const Eigen::MatrixXd& input, const Dropout* dropout,
                             ForwardCache* cache) {
    if (path.empty()) throw ConfigError("forward pass over an empty network");
    if (input.rows() != path.front()->weights.cols()) {
        throw DimensionError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                             std::to_string(path.front()->weights.cols()));
    }
    const bool use_dropout = dropout != nullptr && dropout->active();
    if (cache) {
        cache->inputs.clear();
        cache->pre_activations.clear();
        cache->masks.clear();
    }

    Eigen::MatrixXd x = input;
    for (std::size_t l = 0; l < path.size(); ++l) {
        const DenseLayer& layer = *path[l];
        Eigen::MatrixXd z = layer.weights * x;
        z.colwise() += layer.biases;
        Eigen::MatrixXd a = z;
        apply_activation(layer.activation, a);
        if (!a.allFinite()) throw NumericalError("non-finite activation at layer " + std::to_string(l));
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->pre_activations.push_back(std::move(z));
        }
        const bool hidden = l + 1 < path.size();
        if (hidden && use_dropout) {
            Eigen::MatrixXd mask;
            if (dropout->fixed_masks) {
                mask = dropout->fixed_masks->at(l);
            } else {
                if (!dropout->rng) throw ConfigError("dropout needs a random stream");
                const double scale = 1.0 / dropout->keep_prob;
                mask.resize(a.rows(), a.cols());
                for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                        mask(r, c) = dropout->rng->uniform() < dropout->keep_prob ? scale : 0.0;
                    }
                }
            }
            a = a.cwiseProduct(mask);
            if (cache) cache->masks.push_back(std::move(mask));
        }
        x = std::move(a);
    }
    if (cache) cache->output = x;
    return x;
}

Gradients backward_path(const LayerPath& path, const ForwardCache& cache, const Eigen::MatrixXd& target, double l1,
                        double l2) {
    if (cache.inputs.size() != path.size()) throw DimensionError("backward: cache does not match the network");
    if (target.rows() != cache.output.rows() || target.cols() != cache.output.cols()) {
        throw DimensionError("backward: target shape does not match output");
    }
    const std::size_t layers = path.size();
    Gradients grads;
    grads.weights.resize(layers);
    grads.biases.resize(layers);

    const double scale = 2.0 / static_cast<double>(target.size());
    Eigen::MatrixXd delta = scale * (cache.output - target);
    for (std::size_t step = 0; step < layers; ++step) {
        const std::size_t l = layers - 1 - step;
        const DenseLayer& layer = *path[l];
        scale_by_derivative(layer.activation, cache.pre_activations[l], delta);
        grads.weights[l] = delta * cache.inputs[l].transpose();
        grads.biases[l] = delta.rowwise().sum();
        if (l2 != 0.0) grads.weights[l] += 2.0 * l2 * layer.weights;
        if (l1 != 0.0) grads.weights[l] += l1 * layer.weights.unaryExpr([](double w) {
            return static_cast<double>((w > 0.0) - (w < 0.0));
        });
        if (l > 0) {
            delta = layer.weights.transpose() * delta;
            if (!cache.masks.empty()) delta = delta.cwiseProduct(cache.masks[l - 1]);
        }
    }
    return grads;
}

double penalty(const LayerPath& path, double l1, double l2) {
    double total = 0.0;
    for (const DenseLayer* layer : path) {
        if (l2 != 0.0) total += l2 * layer->weights.squaredNorm();
        if (l1 != 0.0) total += l1 * layer->weights.cwiseAbs().sum();
    }
    return total;
}

double mse(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target) {
    if (output.rows() != target.rows() || output.cols() != target.cols()) {
        throw DimensionError("mse: output and target shapes differ");
    }
    return (output - target).squaredNorm() / static_cast<double>(target.size());
}

Eigen::MatrixXd predict(const MlpModel& model, const Eigen::MatrixXd& raw_input) {
    return forward_path(path_of(model), raw_input * model.input_scale);
}

Eigen::VectorXd forward(const MlpModel& model, std::span<const double> raw_input) {
    const Eigen::Map<const Eigen::VectorXd> x(raw_input.data(), static_cast<Eigen::Index>(raw_input.size()));
    return predict(model, Eigen::MatrixXd(x)).col(0);
}

ForwardCache forward_train(const MlpModel& model, const Eigen::MatrixXd& raw_input, const Dropout& dropout) {
    ForwardCache cache;
    forward_path(path_of(model), raw_input * model.input_scale, &dropout, &cache);
    return cache;
}

double loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target, const MlpModel& model, double l1,
            double l2) {
    return mse(output, target) + penalty(path_of(model), l1, l2);
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& target, double l1,
                   double l2) {
    return backward_path(path_of(model), cache, target, l1, l2);
}

}  // namespace sxfer::nn
