#include <CLI11.hpp>

#include <iostream>
#include <mutex>
#include <sstream>

#include "sxfer/error.hpp"
#include "sxfer/experiment/commands.hpp"
#include "sxfer/io.hpp"
#include "sxfer/version.hpp"

namespace {

using namespace sxfer;

std::vector<double> parse_thicknesses(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) out.push_back(parse_double(token, "thickness"));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical-spectrum surrogate networks with transfer and multi-task learning"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, cache_dir, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seeds;
    unsigned jobs = 1;
    bool no_cache = false, quiet = false;
    app.add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Base seed (gen-data: dataset seed)");
    app.add_option("--seeds", seeds, "Replicates per reported number");
    app.add_option("--jobs", jobs, "Parallel runs")->check(CLI::Range(1u, 256u));
    app.add_option("--cache-dir", cache_dir, "Cache root (default: $SPECTRA_XFER_CACHE or ./.sxfer-cache)");
    app.add_flag("--no-cache", no_cache, "Do not read or write the cache");
    app.add_option("--out-dir", out_dir, "Directory for reports");
    app.add_flag("-q,--quiet", quiet, "No progress output");

    auto* gen = app.add_subcommand("gen-data", "Generate a labelled dataset");
    std::string kind;
    int layers = 0;
    std::optional<std::size_t> size;
    gen->add_option("--kind", kind, "film or sphere")->check(CLI::IsMember({"film", "sphere"}));
    gen->add_option("--layers", layers, "Layer or shell count");
    gen->add_option("--size", size, "Number of examples");

    app.add_subcommand("train", "Direct learning (or one TransferNet) with checkpoint export");
    app.add_subcommand("transfer", "Transfer first-n layers (or configured plans) from a BaseNet");
    app.add_subcommand("grid-search", "All 21 (n1, n2) transfer ranges");
    app.add_subcommand("multitask", "Shared-depth sweep and comparison against direct learning");
    app.add_subcommand("ablate-reg", "L2, L1 and dropout ablation for direct and transfer learning");
    app.add_subcommand("sweep-datasize", "Direct-learning error against dataset size");
    auto* predict = app.add_subcommand("predict", "Predict spectra from a checkpoint");
    std::string checkpoint;
    std::vector<std::string> structures;
    predict->add_option("--checkpoint", checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
    predict->add_option("--thicknesses", structures, "Comma-separated thicknesses in nm; repeatable");
    auto* report = app.add_subcommand("report", "Re-render reports from a results document");
    std::string input;
    report->add_option("--input", input, "Results JSON written by an earlier command")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();

    std::mutex log_mutex;
    try {
        if (verb == "report") {
            const auto results = nlohmann::json::parse(read_file(input));
            for (const auto& p : exp::write_outputs(results, out_dir)) std::cout << p.string() << "\n";
            return exp::results_status(results);
        }

        exp::CommandContext ctx;
        if (!config_path.empty()) ctx.config = exp::load_config(config_path);
        if (seeds) {
            if (*seeds < 1) throw ConfigError("--seeds must be >= 1");
            ctx.config.seeds = *seeds;
        }
        if (verb == "gen-data") {
            if (!kind.empty() || layers > 0 || size) {
                exp::DatasetRef ref = ctx.config.dataset.value_or(exp::DatasetRef{});
                if (!kind.empty()) ref.task.kind = data::task_kind_from_string(kind);
                if (layers > 0) ref.task.layer_count = layers;
                if (size) ref.size = *size;
                if (ref.size == 0) throw ValidationError("dataset size must be positive");
                ref.task.validate();
                ctx.config.dataset = ref;
            }
            if (seed && ctx.config.dataset) ctx.config.dataset->seed = *seed;
        } else if (seed) {
            ctx.config.seed = *seed;
        }
        if (verb == "predict") {
            if (!checkpoint.empty()) ctx.config.checkpoint = checkpoint;
            for (const auto& s : structures) ctx.config.structures.push_back(parse_thicknesses(s));
        }

        ctx.out_dir = out_dir;
        ctx.run.jobs = jobs;
        if (!no_cache) {
            ctx.run.cache = cache_dir.empty() ? exp::Cache::from_environment(".sxfer-cache") : exp::Cache(cache_dir);
        }
        if (!quiet) {
            ctx.run.log = [&](const std::string& message) {
                std::lock_guard lock(log_mutex);
                std::cerr << "[" << verb << "] " << message << "\n";
            };
        }

        nlohmann::json results;
        if (verb == "gen-data") {
            results = exp::cmd_gen_data(ctx);
        } else if (verb == "train") {
            results = exp::cmd_train(ctx);
        } else if (verb == "transfer") {
            results = exp::cmd_transfer(ctx);
        } else if (verb == "grid-search") {
            results = exp::cmd_grid_search(ctx);
        } else if (verb == "multitask") {
            results = exp::cmd_multitask(ctx);
        } else if (verb == "ablate-reg") {
            results = exp::cmd_ablate_reg(ctx);
        } else if (verb == "sweep-datasize") {
            results = exp::cmd_sweep_datasize(ctx);
        } else {
            results = exp::cmd_predict(ctx);
        }
        for (const auto& p : exp::write_outputs(results, out_dir)) std::cout << p.string() << "\n";
        if (verb == "gen-data") {
            for (const auto& [label, hash] : results["datasets"].items()) {
                std::cout << label << " " << hash.get<std::string>() << "\n";
            }
        }
        return exp::results_status(results);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
