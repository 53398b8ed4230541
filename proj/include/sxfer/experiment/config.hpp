#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/nn/train.hpp"
#include "sxfer/transfer.hpp"

namespace sxfer::exp {

// A dataset to generate: task, example count and sampling seed.
struct DatasetRef {
    data::TaskSpec task;
    std::size_t size = 500;
    std::uint64_t seed = 1;

    std::string label() const;
    bool operator==(const DatasetRef&) const = default;
};

nlohmann::json dataset_ref_to_json(const DatasetRef& ref);
// Task keys other than kind and layer_count fall back to the defaults.
DatasetRef dataset_ref_from_json(const nlohmann::json& doc);

// Training settings; without an explicit batch_size the batch follows the
// training-set size (see transfer::default_batch_size).
struct TrainSection {
    nn::TrainConfig config;
    bool auto_batch = true;

    nn::TrainConfig resolve(std::size_t train_examples) const;
    bool operator==(const TrainSection&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;     // base seed of the replicate protocol and the BaseNet
    std::size_t seeds = 5;      // replicates per reported number
    TrainSection train;         // direct, fine-tuning and multi-task runs
    TrainSection source_train;  // BaseNet
    std::optional<DatasetRef> dataset;
    std::optional<DatasetRef> source;
    std::optional<DatasetRef> target;
    std::vector<DatasetRef> tasks;
    std::vector<transfer::TransferPlan> plans;
    std::vector<std::size_t> shared_depths = {1, 2, 3, 4, 5};
    std::vector<double> l2_grid = {1e-8, 1e-7, 1e-6};
    std::vector<double> l1_grid = {1e-9, 1e-8, 1e-7};
    std::vector<double> keep_probs = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
    std::vector<std::size_t> sizes = {100, 250, 500, 1000, 2000, 5000, 20000};
    std::string checkpoint;
    std::vector<std::vector<double>> structures;  // thicknesses in nm, for predict

    transfer::SeedProtocol seed_protocol() const { return {seed, seeds}; }
};

nlohmann::json config_to_json(const ExperimentConfig& config);
// Unknown keys anywhere in the document raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
// Hash of the canonical form; keys of every report.
std::string config_hash(const ExperimentConfig& config);

}  // namespace sxfer::exp
