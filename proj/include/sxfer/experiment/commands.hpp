#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/experiment/config.hpp"
#include "sxfer/transfer.hpp"

namespace sxfer::exp {

struct CommandContext {
    ExperimentConfig config;
    std::filesystem::path out_dir = ".";
    transfer::Context run;  // cache, job count, progress log
};

// Generates (or loads from the cache) the dataset a reference describes.
data::LabeledDataset obtain_dataset(const DatasetRef& ref, const transfer::Context& ctx);

// Each command returns a results document: the command name, artifact
// version, config and its hash, dataset hashes, and the numbers. Reports are
// rendered from that document alone.
nlohmann::json cmd_gen_data(const CommandContext& ctx);
nlohmann::json cmd_train(const CommandContext& ctx);
nlohmann::json cmd_transfer(const CommandContext& ctx);
nlohmann::json cmd_grid_search(const CommandContext& ctx);
nlohmann::json cmd_multitask(const CommandContext& ctx);
nlohmann::json cmd_ablate_reg(const CommandContext& ctx);
nlohmann::json cmd_sweep_datasize(const CommandContext& ctx);
nlohmann::json cmd_predict(const CommandContext& ctx);

// Writes <command>.json and the command's CSV and SVG reports atomically.
std::vector<std::filesystem::path> write_outputs(const nlohmann::json& results, const std::filesystem::path& out_dir);

// 0 when every requested run completed, 3 when some runs failed.
int results_status(const nlohmann::json& results);

}  // namespace sxfer::exp
