#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/experiment/stats.hpp"
#include "sxfer/metrics.hpp"
#include "sxfer/nn/mlp.hpp"
#include "sxfer/nn/train.hpp"
#include "sxfer/transfer.hpp"

namespace sxfer::multitask {

// Head layer i of task t draws from stream i + kHeadStreamStride * t, so task
// 0 initializes exactly like a plain network from the same seed.
inline constexpr std::uint64_t kHeadStreamStride = 64;
// Task t shuffles and drops out on the plain trainer's streams offset by
// kTaskStreamStride * t.
inline constexpr std::uint64_t kTaskStreamStride = 1000;
inline constexpr int kMultiTaskCheckpointVersion = 1;

struct TaskHead {
    std::string task_id;
    data::TaskSpec spec;
    std::vector<nn::DenseLayer> layers;  // remaining hidden layers, then the output layer
};

struct MultiTaskModel {
    std::vector<nn::DenseLayer> trunk;  // the first n_shared hidden layers
    std::vector<TaskHead> heads;        // registry; position is the task index
    double input_scale = 1.0 / 70.0;
    std::uint64_t seed = 0;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t n_shared() const { return trunk.size(); }
    std::size_t task_count() const { return heads.size(); }
    // Throws LookupError for an unregistered id.
    std::size_t task_index(const std::string& task_id) const;
    nn::LayerPath path(std::size_t task) const;
    // Architecture seen by one task: trunk followed by its head.
    nn::Architecture architecture(std::size_t task) const;
    // Throws ConfigError if layers do not chain or heads differ in depth.
    void validate() const;
};

// Trunk of n_shared hidden layers plus one head per task completing the
// 16 -> 6 x 256 -> 200 network. Task ids are TaskSpec::name() and must be
// unique. A single task is accepted; it is the degenerate case.
MultiTaskModel build_multitask(std::size_t n_shared, const std::vector<data::TaskSpec>& tasks, std::uint64_t seed);

// Eval-mode forward pass for one task on raw inputs.
Eigen::MatrixXd predict(const MultiTaskModel& model, std::size_t task, const Eigen::MatrixXd& raw_input);

// Adam/SGD state for the trunk and every head; each layer keeps its own step count.
struct MultiTaskOptimizer {
    std::vector<nn::LayerOptimizerState> trunk;
    std::vector<std::vector<nn::LayerOptimizerState>> heads;

    explicit MultiTaskOptimizer(const MultiTaskModel& model);
};

// One optimizer step on a task-homogeneous batch (`input` already scaled).
// Only the trunk and that task's head change. Returns the batch loss.
double train_step(MultiTaskModel& model, MultiTaskOptimizer& optimizer, std::size_t task,
                  const Eigen::MatrixXd& input, const Eigen::MatrixXd& target, const nn::TrainConfig& config,
                  const nn::Dropout& dropout);

struct MultiTaskHistory {
    std::vector<nn::TrainHistory> tasks;  // best_epoch mirrors the shared best epoch
    std::vector<double> mean_val_error;
    std::size_t best_epoch = 0;

    std::size_t epochs() const { return mean_val_error.size(); }
};

struct MultiTaskResult {
    MultiTaskModel model;  // snapshot at the best mean validation error
    MultiTaskHistory history;
};

// Round-robin over tasks, one task-homogeneous batch per task per round, each
// task reshuffled at the start of its own pass. An epoch ends after one pass
// over the largest training split. datasets[t] belongs to head t.
MultiTaskResult train_multitask(const MultiTaskModel& model, const std::vector<data::LabeledDataset>& datasets,
                                const nn::TrainConfig& config);

// Spectrum error of one task's head on a split of its dataset.
metrics::BatchError evaluate_multitask(const MultiTaskModel& model, const std::string& task_id,
                                       const data::LabeledDataset& dataset, data::Split split = data::Split::Test);

std::string serialize_multitask(const MultiTaskModel& model);
MultiTaskModel parse_multitask(const std::string& text);
void save_multitask(const MultiTaskModel& model, const std::filesystem::path& path);
MultiTaskModel load_multitask(const std::filesystem::path& path);

struct MultiTaskRun {
    std::vector<double> test_error;  // per task
    std::vector<double> best_val_error;
    double best_mean_val_error = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

// Build + train + evaluate, cached on the run description.
MultiTaskRun run_multitask(const std::vector<data::LabeledDataset>& datasets, std::size_t n_shared,
                           std::uint64_t init_seed, const nn::TrainConfig& config, const transfer::Context& ctx);

struct SweepResult {
    std::vector<std::string> task_ids;
    std::vector<std::size_t> depths;
    // [depth][task][replicate]
    std::vector<std::vector<std::vector<double>>> test_errors;
    std::vector<std::vector<std::vector<double>>> val_errors;
    std::vector<std::vector<double>> direct_test_errors;  // [task][replicate]

    exp::Summary test_summary(std::size_t depth_index, std::size_t task) const;
    exp::Summary direct_summary(std::size_t task) const;
    // Depth index with the lowest mean validation error for this task.
    std::size_t best_depth_index(std::size_t task) const;
};

// Multi-task training at each shared depth for every replicate, plus direct
// learning per task with the same seeds and config.
SweepResult sweep_shared_depth(const std::vector<data::LabeledDataset>& datasets,
                               const std::vector<std::size_t>& depths, const nn::TrainConfig& config,
                               const transfer::SeedProtocol& seeds, const transfer::Context& ctx);

}  // namespace sxfer::multitask
