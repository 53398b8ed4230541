#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/experiment/cache.hpp"
#include "sxfer/experiment/stats.hpp"
#include "sxfer/nn/mlp.hpp"
#include "sxfer/nn/train.hpp"

namespace sxfer::transfer {

inline constexpr std::size_t kHiddenLayers = 6;
inline constexpr std::size_t kHiddenWidth = 256;
inline constexpr std::size_t kGridCells = kHiddenLayers * (kHiddenLayers + 1) / 2;

// 16 -> 6 x 256 ReLU -> 200; sigmoid output for transmission, softplus for Q_sca.
nn::Architecture default_architecture(data::TaskKind kind);

// 100 for large training sets, 32 for the small-data regime.
std::size_t default_batch_size(std::size_t train_examples);

// Hidden layers n1..n2 (1-based, inclusive) come from the BaseNet. (0, 0) is
// the empty plan: nothing is copied, which is direct learning.
struct TransferPlan {
    int n1 = 1;
    int n2 = static_cast<int>(kHiddenLayers);
    // When false the copied layers stay frozen during fine-tuning.
    bool fine_tune_all = true;

    static TransferPlan none() { return {0, 0, true}; }
    static TransferPlan first(int n) { return {1, n, true}; }

    bool empty() const { return n1 == 0 && n2 == 0; }
    // `hidden` is 1-based.
    bool copies(std::size_t hidden) const {
        return !empty() && static_cast<int>(hidden) >= n1 && static_cast<int>(hidden) <= n2;
    }
    // Throws RangeError unless empty or 1 <= n1 <= n2 <= hidden_count.
    void validate(std::size_t hidden_count = kHiddenLayers) const;
    std::string label() const;
    bool operator==(const TransferPlan&) const = default;
};

nlohmann::json plan_to_json(const TransferPlan& plan);
TransferPlan plan_from_json(const nlohmann::json& doc);

// The 21 plans with 1 <= n1 <= n2 <= 6, ordered by n1 then n2.
std::vector<TransferPlan> grid_plans(std::size_t hidden_count = kHiddenLayers);
// 0 for the empty plan, 1..21 for grid plans in grid_plans() order.
std::size_t cell_index(const TransferPlan& plan, std::size_t hidden_count = kHiddenLayers);

// Fresh network for `target` from `seed` with hidden layers n1..n2 replaced by
// the BaseNet's. Non-copied layers are bitwise equal to init_network(target,
// seed). The target must share the BaseNet's trunk: every layer shape equal,
// the output activation may differ. Otherwise CompatibilityError.
nn::MlpModel transfer_layers(const nn::MlpModel& base, const TransferPlan& plan, const nn::Architecture& target,
                             std::uint64_t seed);
// Target architecture identical to the BaseNet's.
nn::MlpModel transfer_layers(const nn::MlpModel& base, const TransferPlan& plan, std::uint64_t seed);

// Which layers fine-tuning may update.
std::vector<bool> trainable_mask(const TransferPlan& plan, std::size_t layer_count);

// Hash of the serialized checkpoint.
std::string model_hash(const nn::MlpModel& model);

// Replicate r trains with seed base_seed + 1000 r. Its direct run initializes
// from that seed and the transfer run for grid cell c from that seed + c, so
// fresh layers differ between cells while batches and dropout masks match.
struct SeedProtocol {
    std::uint64_t base_seed = 1;
    std::size_t replicates = 5;

    std::uint64_t replicate_seed(std::size_t r) const { return base_seed + 1000 * r; }
    std::uint64_t init_seed(std::size_t r, const TransferPlan& plan) const {
        return replicate_seed(r) + cell_index(plan);
    }
};

struct Context {
    exp::Cache cache;
    unsigned jobs = 1;
    std::function<void(const std::string&)> log;

    void note(const std::string& message) const {
        if (log) log(message);
    }
};

// Trains on the source train split (or loads the cached result).
nn::MlpModel train_basenet(const data::LabeledDataset& source, const nn::Architecture& arch,
                           const nn::TrainConfig& config, std::uint64_t seed, const Context& ctx);

struct RunResult {
    double test_error = 0.0;
    std::size_t test_guard_count = 0;
    double best_val_error = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    nn::TrainHistory history;
    std::optional<nn::MlpModel> model;  // only when RunSpec::keep_model
};

nlohmann::json run_to_json(const RunResult& run);
RunResult run_from_json(const nlohmann::json& doc);

// One fine-tuning or direct-learning run on the target dataset.
struct RunSpec {
    const nn::MlpModel* base = nullptr;  // null or an empty plan: direct learning
    TransferPlan plan = TransferPlan::none();
    nn::Architecture arch;
    std::uint64_t init_seed = 0;
    nn::TrainConfig config;  // config.seed drives batches and dropout
    // Precomputed hashes; computed on demand when empty.
    std::string base_hash;
    std::string target_hash;
    // Return (and cache) the trained model along with the result.
    bool keep_model = false;
};

nlohmann::json run_description(const data::LabeledDataset& target, const RunSpec& spec);
RunResult run_finetune(const data::LabeledDataset& target, const RunSpec& spec, const Context& ctx);

struct TransferSetup {
    nn::Architecture target_arch;
    nn::TrainConfig target_config;
    SeedProtocol seeds;
};

// Direct-learning runs, one per replicate, parallel over ctx.jobs.
std::vector<RunResult> run_direct(const data::LabeledDataset& target, const TransferSetup& setup, const Context& ctx);

struct CellResult {
    TransferPlan plan;
    std::vector<double> errors;  // one per replicate
    exp::Summary summary;
    double reduction = 0.0;  // relative to the direct mean
    bool negative = false;   // mean error above the direct mean
    bool failed = false;
    std::string failure;
};

struct TransferReport {
    std::string source_task;
    std::string target_task;
    std::string source_hash;  // dataset hashes
    std::string target_hash;
    std::string base_hash;  // BaseNet checkpoint hash
    std::vector<double> direct_errors;
    exp::Summary direct;
    std::vector<CellResult> cells;

    // Lowest mean error among completed cells.
    std::optional<std::size_t> best_cell() const;
    std::vector<std::size_t> negative_cells() const;
    bool any_failed() const;
    // Throws ValidationError if a stored reduction or flag disagrees with the errors.
    void validate() const;
};

nlohmann::json report_to_json(const TransferReport& report);

// Fine-tunes `base` under each plan for every replicate and compares against
// direct learning with the same target splits and training config. A failing
// cell is recorded and does not stop the others.
TransferReport evaluate_plans(const nn::MlpModel& base, const data::LabeledDataset& target,
                              const std::vector<TransferPlan>& plans, const TransferSetup& setup,
                              const Context& ctx);

struct SourceSetup {
    nn::Architecture arch;
    nn::TrainConfig config;
    std::uint64_t seed = 1;
};

// Trains (or loads) the BaseNet on `source`, then evaluate_plans.
TransferReport run_transfer_experiment(const data::LabeledDataset& source, const data::LabeledDataset& target,
                                       const std::vector<TransferPlan>& plans, const SourceSetup& source_setup,
                                       const TransferSetup& setup, const Context& ctx);

// All 21 (n1, n2) cells.
TransferReport grid_search_transfer(const nn::MlpModel& base, const data::LabeledDataset& target,
                                    const TransferSetup& setup, const Context& ctx);

}  // namespace sxfer::transfer
