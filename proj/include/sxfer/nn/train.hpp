#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/metrics.hpp"
#include "sxfer/nn/mlp.hpp"

namespace sxfer::nn {

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    int epochs = 500;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double l2_lambda = 0.0;
    double l1_lambda = 0.0;
    double keep_prob = 1.0;  // 1 disables dropout
    int patience = 50;       // epochs without a val improvement before stopping; 0 disables
    std::uint64_t seed = 0;  // shuffle order and dropout masks

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults = {});
// Hash of the canonical JSON form, used in cache keys.
std::string train_config_hash(const TrainConfig& config);

struct TrainHistory {
    std::vector<double> train_loss;  // mean batch loss, penalty included
    std::vector<double> val_loss;    // MSE on the val split
    std::vector<double> val_error;   // spectrum error on the val split
    std::size_t best_epoch = 0;

    std::size_t epochs() const { return val_error.size(); }
    double best_val_error() const { return val_error.at(best_epoch); }
};

nlohmann::json history_to_json(const TrainHistory& history);
TrainHistory history_from_json(const nlohmann::json& doc);

struct TrainResult {
    MlpModel model;  // snapshot from the best validation epoch
    TrainHistory history;
};

// Adam/SGD state for one dense layer.
struct LayerOptimizerState {
    Eigen::MatrixXd m_weights, v_weights;
    Eigen::VectorXd m_biases, v_biases;
    long steps = 0;
};

void apply_update(DenseLayer& layer, LayerOptimizerState& state, const Eigen::MatrixXd& grad_weights,
                  const Eigen::VectorXd& grad_biases, const TrainConfig& config);

// Columns `indices[begin, end)` of `source`.
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& source, const std::vector<std::size_t>& indices,
                               std::size_t begin, std::size_t end);

// Random stream ids shared by the single- and multi-task trainers.
inline constexpr std::uint64_t kShuffleStream = 101;
inline constexpr std::uint64_t kDropoutStream = 202;

// Mini-batch training on the train split with per-epoch validation. Layers
// whose trainable_mask entry is false are never updated; an empty mask trains
// every layer.
TrainResult train(const MlpModel& model, const data::LabeledDataset& dataset, const TrainConfig& config,
                  const std::vector<bool>& trainable_mask = {});

metrics::BatchError evaluate(const MlpModel& model, const data::LabeledDataset& dataset, data::Split split);

}  // namespace sxfer::nn
