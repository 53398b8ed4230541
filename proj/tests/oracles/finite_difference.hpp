#pragma once

// Loss evaluated with explicit loops, independent of the library's matrix
// forward pass, and its central finite-difference gradient.

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "sxfer/nn/mlp.hpp"

namespace sxfer::oracle {

struct NaiveEvaluation {
    double loss = 0.0;
    double min_abs_pre_activation = 1e300;  // distance to the nearest ReLU kink
};

inline double naive_activate(nn::Activation act, double z) {
    switch (act) {
        case nn::Activation::ReLU: return z > 0.0 ? z : 0.0;
        case nn::Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case nn::Activation::Softplus: return std::log(1.0 + std::exp(z));
        case nn::Activation::Linear: return z;
    }
    return z;
}

// masks[l](unit, example) multiplies hidden activation l; empty for no dropout.
inline NaiveEvaluation naive_loss(const std::vector<nn::DenseLayer>& layers, const Eigen::MatrixXd& input,
                                  const Eigen::MatrixXd& target, const std::vector<Eigen::MatrixXd>& masks, double l1,
                                  double l2) {
    NaiveEvaluation out;
    double sq = 0.0;
    for (Eigen::Index e = 0; e < input.cols(); ++e) {
        std::vector<double> x(input.col(e).data(), input.col(e).data() + input.rows());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            std::vector<double> next(static_cast<std::size_t>(layer.weights.rows()));
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                double z = layer.biases(r);
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) z += layer.weights(r, c) * x[static_cast<std::size_t>(c)];
                if (layer.activation == nn::Activation::ReLU) out.min_abs_pre_activation = std::min(out.min_abs_pre_activation, std::abs(z));
                double a = naive_activate(layer.activation, z);
                if (!masks.empty() && l + 1 < layers.size()) a *= masks[l](r, e);
                next[static_cast<std::size_t>(r)] = a;
            }
            x = std::move(next);
        }
        for (Eigen::Index p = 0; p < target.rows(); ++p) {
            const double d = x[static_cast<std::size_t>(p)] - target(p, e);
            sq += d * d;
        }
    }
    out.loss = sq / static_cast<double>(target.size());
    for (const auto& layer : layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                const double w = layer.weights(r, c);
                out.loss += l2 * w * w + l1 * std::abs(w);
            }
        }
    }
    return out;
}

struct NumericGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

inline NumericGradients central_difference(std::vector<nn::DenseLayer> layers, const Eigen::MatrixXd& input,
                                           const Eigen::MatrixXd& target, const std::vector<Eigen::MatrixXd>& masks,
                                           double l1, double l2, double h = 1e-5) {
    NumericGradients out;
    auto eval = [&] { return naive_loss(layers, input, target, masks, l1, l2).loss; };
    for (auto& layer : layers) {
        Eigen::MatrixXd gw(layer.weights.rows(), layer.weights.cols());
        for (Eigen::Index r = 0; r < gw.rows(); ++r) {
            for (Eigen::Index c = 0; c < gw.cols(); ++c) {
                const double w = layer.weights(r, c);
                layer.weights(r, c) = w + h;
                const double up = eval();
                layer.weights(r, c) = w - h;
                const double down = eval();
                layer.weights(r, c) = w;
                gw(r, c) = (up - down) / (2.0 * h);
            }
        }
        Eigen::VectorXd gb(layer.biases.size());
        for (Eigen::Index r = 0; r < gb.size(); ++r) {
            const double b = layer.biases(r);
            layer.biases(r) = b + h;
            const double up = eval();
            layer.biases(r) = b - h;
            const double down = eval();
            layer.biases(r) = b;
            gb(r) = (up - down) / (2.0 * h);
        }
        out.weights.push_back(gw);
        out.biases.push_back(gb);
    }
    return out;
}

// |a - b| / max(|a|, |b|, floor); the floor keeps exactly-zero gradients from
// dividing rounding noise by zero.
inline double relative_gap(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace sxfer::oracle
