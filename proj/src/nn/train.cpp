#include "sxfer/nn/train.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"

namespace sxfer::nn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train config: learning_rate must be >= 0");
    if (!(l2_lambda >= 0.0)) throw ConfigError("train config: l2_lambda must be >= 0");
    if (!(l1_lambda >= 0.0)) throw ConfigError("train config: l1_lambda must be >= 0");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("train config: keep_prob must be in (0, 1]");
    if (patience < 0) throw ConfigError("train config: patience must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
        throw ConfigError("train config: invalid Adam constants");
    }
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"l2_lambda", c.l2_lambda},
            {"l1_lambda", c.l1_lambda},
            {"keep_prob", c.keep_prob},
            {"patience", c.patience},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
    if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
    static const std::set<std::string> kKeys = {"epochs",   "batch_size", "learning_rate", "optimizer",
                                                "beta1",    "beta2",      "adam_epsilon",  "l2_lambda",
                                                "l1_lambda", "keep_prob", "patience",      "seed"};
    for (const auto& [key, _] : doc.items()) {
        if (!kKeys.contains(key)) throw ConfigError("train config: unknown key '" + key + "'");
    }
    try {
        c.epochs = doc.value("epochs", c.epochs);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        if (doc.contains("optimizer")) {
            const std::string name = doc["optimizer"];
            if (name == "adam") {
                c.optimizer = OptimizerKind::Adam;
            } else if (name == "sgd") {
                c.optimizer = OptimizerKind::Sgd;
            } else {
                throw ConfigError("train config: unknown optimizer '" + name + "'");
            }
        }
        c.beta1 = doc.value("beta1", c.beta1);
        c.beta2 = doc.value("beta2", c.beta2);
        c.adam_epsilon = doc.value("adam_epsilon", c.adam_epsilon);
        c.l2_lambda = doc.value("l2_lambda", c.l2_lambda);
        c.l1_lambda = doc.value("l1_lambda", c.l1_lambda);
        c.keep_prob = doc.value("keep_prob", c.keep_prob);
        c.patience = doc.value("patience", c.patience);
        c.seed = doc.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string train_config_hash(const TrainConfig& config) {
    return sha256_hex(train_config_to_json(config).dump()).substr(0, 16);
}

nlohmann::json history_to_json(const TrainHistory& h) {
    return {{"train_loss", h.train_loss}, {"val_loss", h.val_loss}, {"val_error", h.val_error},
            {"best_epoch", h.best_epoch}};
}

TrainHistory history_from_json(const nlohmann::json& doc) {
    try {
        TrainHistory h;
        h.train_loss = doc.at("train_loss").get<std::vector<double>>();
        h.val_loss = doc.at("val_loss").get<std::vector<double>>();
        h.val_error = doc.at("val_error").get<std::vector<double>>();
        h.best_epoch = doc.at("best_epoch").get<std::size_t>();
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train history: ") + e.what());
    }
}

void apply_update(DenseLayer& layer, LayerOptimizerState& state, const Eigen::MatrixXd& grad_weights,
                  const Eigen::VectorXd& grad_biases, const TrainConfig& config) {
    if (config.optimizer == OptimizerKind::Sgd) {
        layer.weights -= config.learning_rate * grad_weights;
        layer.biases -= config.learning_rate * grad_biases;
        ++state.steps;
        return;
    }
    if (state.steps == 0) {
        state.m_weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
        state.v_weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
        state.m_biases = Eigen::VectorXd::Zero(layer.biases.size());
        state.v_biases = Eigen::VectorXd::Zero(layer.biases.size());
    }
    ++state.steps;
    const double b1 = config.beta1, b2 = config.beta2;
    state.m_weights = b1 * state.m_weights + (1.0 - b1) * grad_weights;
    state.v_weights = b2 * state.v_weights + (1.0 - b2) * grad_weights.cwiseAbs2();
    state.m_biases = b1 * state.m_biases + (1.0 - b1) * grad_biases;
    state.v_biases = b2 * state.v_biases + (1.0 - b2) * grad_biases.cwiseAbs2();

    const auto t = static_cast<double>(state.steps);
    const double step = config.learning_rate * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
    const double eps = config.adam_epsilon;
    layer.weights.array() -= step * state.m_weights.array() / (state.v_weights.array().sqrt() + eps);
    layer.biases.array() -= step * state.m_biases.array() / (state.v_biases.array().sqrt() + eps);
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& source, const std::vector<std::size_t>& indices,
                               std::size_t begin, std::size_t end) {
    Eigen::MatrixXd out(source.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t k = begin; k < end; ++k) {
        out.col(static_cast<Eigen::Index>(k - begin)) = source.col(static_cast<Eigen::Index>(indices[k]));
    }
    return out;
}

metrics::BatchError evaluate(const MlpModel& model, const data::LabeledDataset& dataset, data::Split split) {
    return metrics::mean_spectrum_error(predict(model, dataset.features_of(split)), dataset.targets_of(split));
}

TrainResult train(const MlpModel& model, const data::LabeledDataset& dataset, const TrainConfig& config,
                  const std::vector<bool>& trainable_mask) {
    config.validate();
    if (dataset.features.rows() != static_cast<Eigen::Index>(model.input_width())) {
        throw DimensionError("train: dataset feature width " + std::to_string(dataset.features.rows()) +
                             " does not match model input " + std::to_string(model.input_width()));
    }
    if (dataset.targets.rows() != static_cast<Eigen::Index>(model.output_width())) {
        throw DimensionError("train: dataset target width does not match model output");
    }
    if (!trainable_mask.empty() && trainable_mask.size() != model.layers.size()) {
        throw ConfigError("train: trainable_mask has " + std::to_string(trainable_mask.size()) + " entries for " +
                          std::to_string(model.layers.size()) + " layers");
    }

    TrainResult result{model, {}};
    MlpModel current = model;
    const LayerPath path = path_of(current);
    std::vector<LayerOptimizerState> states(current.layers.size());

    const auto train_idx = dataset.indices(data::Split::Train);
    if (train_idx.empty()) throw ConfigError("train: dataset has no training examples");
    const Eigen::MatrixXd train_x = dataset.features * model.input_scale;
    const Eigen::MatrixXd val_x = dataset.features_of(data::Split::Val) * model.input_scale;
    const Eigen::MatrixXd val_t = dataset.targets_of(data::Split::Val);

    Rng shuffle_rng(substream(config.seed, kShuffleStream));
    Rng dropout_rng(substream(config.seed, kDropoutStream));
    const Dropout dropout{config.keep_prob, &dropout_rng, nullptr};

    std::vector<std::size_t> order = train_idx;
    const std::size_t batch = std::min(config.batch_size, order.size());
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(begin + batch, order.size());
            const Eigen::MatrixXd x = gather_columns(train_x, order, begin, end);
            const Eigen::MatrixXd t = gather_columns(dataset.targets, order, begin, end);
            ForwardCache cache;
            try {
                forward_path(path, x, &dropout, &cache);
            } catch (const NumericalError& e) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            const double batch_loss = mse(cache.output, t) + penalty(path, config.l1_lambda, config.l2_lambda);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("training loss became non-finite at epoch " + std::to_string(epoch));
            }
            loss_sum += batch_loss * static_cast<double>(end - begin);
            const Gradients grads = backward_path(path, cache, t, config.l1_lambda, config.l2_lambda);
            for (std::size_t l = 0; l < current.layers.size(); ++l) {
                if (!trainable_mask.empty() && !trainable_mask[l]) continue;
                apply_update(current.layers[l], states[l], grads.weights[l], grads.biases[l], config);
            }
        }

        Eigen::MatrixXd val_pred;
        try {
            val_pred = forward_path(path, val_x);
        } catch (const NumericalError& e) {
            throw TrainingError("validation diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double val_error = metrics::mean_spectrum_error(val_pred, val_t).mean;
        result.history.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        result.history.val_loss.push_back(mse(val_pred, val_t));
        result.history.val_error.push_back(val_error);

        if (val_error < best) {
            best = val_error;
            result.history.best_epoch = static_cast<std::size_t>(epoch);
            result.model.layers = current.layers;
        }
        if (config.patience > 0 && static_cast<std::size_t>(epoch) - result.history.best_epoch >=
                                       static_cast<std::size_t>(config.patience)) {
            break;
        }
    }
    result.model.provenance["best_epoch"] = result.history.best_epoch;
    result.model.provenance["epochs_run"] = result.history.epochs();
    result.model.provenance["train_config"] = train_config_to_json(config);
    result.model.provenance["dataset_task"] = dataset.meta.spec.name();
    result.model.provenance["task"] = data::task_to_json(dataset.meta.spec);
    return result;
}

}  // namespace sxfer::nn
