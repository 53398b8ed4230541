#include "sxfer/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>

#include "sxfer/error.hpp"
#include "sxfer/experiment/parallel.hpp"
#include "sxfer/io.hpp"
#include "sxfer/nn/checkpoint.hpp"

namespace sxfer::multitask {

namespace {

constexpr int kRunCacheVersion = 1;

nlohmann::json layers_to_json(const std::vector<nn::DenseLayer>& layers) {
    nn::Architecture arch;
    for (const auto& l : layers) arch.push_back(l.shape());
    return nn::architecture_to_json(arch);
}

}  // namespace

std::size_t MultiTaskModel::task_index(const std::string& task_id) const {
    for (std::size_t t = 0; t < heads.size(); ++t) {
        if (heads[t].task_id == task_id) return t;
    }
    throw LookupError("multi-task model has no task '" + task_id + "'");
}

nn::LayerPath MultiTaskModel::path(std::size_t task) const {
    nn::LayerPath p;
    for (const auto& l : trunk) p.push_back(&l);
    for (const auto& l : heads.at(task).layers) p.push_back(&l);
    return p;
}

nn::Architecture MultiTaskModel::architecture(std::size_t task) const {
    nn::Architecture arch;
    for (const auto* l : path(task)) arch.push_back(l->shape());
    return arch;
}

void MultiTaskModel::validate() const {
    if (trunk.empty()) throw ConfigError("multi-task model: empty trunk");
    if (heads.empty()) throw ConfigError("multi-task model: no task heads");
    std::set<std::string> ids;
    for (std::size_t t = 0; t < heads.size(); ++t) {
        if (!ids.insert(heads[t].task_id).second) {
            throw ConfigError("multi-task model: duplicate task '" + heads[t].task_id + "'");
        }
        if (heads[t].layers.size() != heads[0].layers.size()) {
            throw ConfigError("multi-task model: head '" + heads[t].task_id + "' has a different depth");
        }
        nn::validate_architecture(architecture(t));
    }
}

MultiTaskModel build_multitask(std::size_t n_shared, const std::vector<data::TaskSpec>& tasks, std::uint64_t seed) {
    if (tasks.empty()) throw ConfigError("build_multitask: no tasks");
    if (n_shared < 1 || n_shared > transfer::kHiddenLayers) {
        throw ConfigError("build_multitask: n_shared must be in [1, " + std::to_string(transfer::kHiddenLayers) + "]");
    }
    MultiTaskModel model;
    model.seed = seed;
    const auto trunk_arch = transfer::default_architecture(tasks.front().kind);
    for (std::size_t i = 0; i < n_shared; ++i) model.trunk.push_back(nn::init_layer(trunk_arch[i], seed, i));
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        tasks[t].validate();
        if (static_cast<std::size_t>(tasks[t].layer_count) > data::kMaskWidth) {
            throw ConfigError("build_multitask: task " + tasks[t].name() + " exceeds the input width");
        }
        const auto arch = transfer::default_architecture(tasks[t].kind);
        if (nn::trunk_fingerprint(arch) != nn::trunk_fingerprint(trunk_arch)) {
            throw ConfigError("build_multitask: task " + tasks[t].name() + " does not fit the shared trunk");
        }
        TaskHead head{tasks[t].name(), tasks[t], {}};
        for (std::size_t i = n_shared; i < arch.size(); ++i) {
            head.layers.push_back(nn::init_layer(arch[i], seed, i + kHeadStreamStride * t));
        }
        model.heads.push_back(std::move(head));
    }
    model.validate();
    return model;
}

Eigen::MatrixXd predict(const MultiTaskModel& model, std::size_t task, const Eigen::MatrixXd& raw_input) {
    if (task >= model.heads.size()) throw LookupError("multi-task model has no task index " + std::to_string(task));
    if (raw_input.rows() != model.trunk.front().weights.cols()) {
        throw DimensionError("multi-task predict: input has " + std::to_string(raw_input.rows()) + " rows");
    }
    return nn::forward_path(model.path(task), raw_input * model.input_scale);
}

MultiTaskOptimizer::MultiTaskOptimizer(const MultiTaskModel& model)
    : trunk(model.trunk.size()), heads(model.heads.size()) {
    for (std::size_t t = 0; t < model.heads.size(); ++t) heads[t].resize(model.heads[t].layers.size());
}

double train_step(MultiTaskModel& model, MultiTaskOptimizer& optimizer, std::size_t task,
                  const Eigen::MatrixXd& input, const Eigen::MatrixXd& target, const nn::TrainConfig& config,
                  const nn::Dropout& dropout) {
    const auto path = model.path(task);
    nn::ForwardCache cache;
    nn::forward_path(path, input, &dropout, &cache);
    const double batch_loss = nn::mse(cache.output, target) + nn::penalty(path, config.l1_lambda, config.l2_lambda);
    if (!std::isfinite(batch_loss)) throw NumericalError("batch loss is not finite");
    const auto grads = nn::backward_path(path, cache, target, config.l1_lambda, config.l2_lambda);
    const std::size_t shared = model.trunk.size();
    for (std::size_t l = 0; l < path.size(); ++l) {
        if (l < shared) {
            nn::apply_update(model.trunk[l], optimizer.trunk[l], grads.weights[l], grads.biases[l], config);
        } else {
            nn::apply_update(model.heads[task].layers[l - shared], optimizer.heads[task][l - shared], grads.weights[l],
                             grads.biases[l], config);
        }
    }
    return batch_loss;
}

namespace {

struct TaskStream {
    std::vector<std::size_t> order;
    Eigen::MatrixXd train_x;
    Eigen::MatrixXd val_x;
    Eigen::MatrixXd val_t;
    Rng shuffle_rng{0};
    Rng dropout_rng{0};
    std::size_t batch = 0;
    std::size_t batches = 0;
    std::size_t cursor = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
};

}  // namespace

MultiTaskResult train_multitask(const MultiTaskModel& model, const std::vector<data::LabeledDataset>& datasets,
                                const nn::TrainConfig& config) {
    config.validate();
    model.validate();
    if (datasets.size() != model.heads.size()) {
        throw ConfigError("train_multitask: " + std::to_string(datasets.size()) + " datasets for " +
                          std::to_string(model.heads.size()) + " tasks");
    }
    const std::size_t n_tasks = model.heads.size();
    std::vector<TaskStream> streams(n_tasks);
    std::size_t rounds = 0;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const auto& ds = datasets[t];
        if (!(ds.meta.spec == model.heads[t].spec)) {
            throw ConfigError("train_multitask: dataset " + std::to_string(t) + " is " + ds.meta.spec.name() +
                              ", expected " + model.heads[t].task_id);
        }
        if (ds.features.rows() != model.trunk.front().weights.cols()) {
            throw DimensionError("train_multitask: dataset feature width does not match the trunk");
        }
        auto& s = streams[t];
        s.order = ds.indices(data::Split::Train);
        if (s.order.empty()) throw ConfigError("train_multitask: task " + model.heads[t].task_id + " has no training data");
        s.train_x = ds.features * model.input_scale;
        s.val_x = ds.features_of(data::Split::Val) * model.input_scale;
        s.val_t = ds.targets_of(data::Split::Val);
        s.shuffle_rng = Rng(substream(config.seed, nn::kShuffleStream + kTaskStreamStride * t));
        s.dropout_rng = Rng(substream(config.seed, nn::kDropoutStream + kTaskStreamStride * t));
        s.batch = std::min(config.batch_size, s.order.size());
        s.batches = (s.order.size() + s.batch - 1) / s.batch;
        s.cursor = s.batches;  // forces a shuffle before the first batch
        rounds = std::max(rounds, s.batches);
    }

    MultiTaskResult result{model, {}};
    result.history.tasks.resize(n_tasks);
    MultiTaskModel current = model;
    MultiTaskOptimizer optimizer(current);
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (auto& s : streams) {
            s.loss_sum = 0.0;
            s.loss_count = 0;
        }
        for (std::size_t round = 0; round < rounds; ++round) {
            for (std::size_t t = 0; t < n_tasks; ++t) {
                auto& s = streams[t];
                if (s.cursor == s.batches) {
                    s.shuffle_rng.shuffle(s.order.begin(), s.order.end());
                    s.cursor = 0;
                }
                const std::size_t begin = s.cursor * s.batch;
                const std::size_t end = std::min(begin + s.batch, s.order.size());
                ++s.cursor;
                const Eigen::MatrixXd x = nn::gather_columns(s.train_x, s.order, begin, end);
                const Eigen::MatrixXd y = nn::gather_columns(datasets[t].targets, s.order, begin, end);
                const nn::Dropout dropout{config.keep_prob, &s.dropout_rng, nullptr};
                try {
                    const double l = train_step(current, optimizer, t, x, y, config, dropout);
                    s.loss_sum += l * static_cast<double>(end - begin);
                    s.loss_count += end - begin;
                } catch (const NumericalError& e) {
                    throw TrainingError("task " + current.heads[t].task_id + " diverged at epoch " +
                                        std::to_string(epoch) + ": " + e.what());
                }
            }
        }

        double mean = 0.0;
        for (std::size_t t = 0; t < n_tasks; ++t) {
            auto& s = streams[t];
            Eigen::MatrixXd val_pred;
            try {
                val_pred = nn::forward_path(current.path(t), s.val_x);
            } catch (const NumericalError& e) {
                throw TrainingError("task " + current.heads[t].task_id + " validation diverged at epoch " +
                                    std::to_string(epoch) + ": " + e.what());
            }
            const double err = metrics::mean_spectrum_error(val_pred, s.val_t).mean;
            auto& h = result.history.tasks[t];
            h.train_loss.push_back(s.loss_sum / static_cast<double>(s.loss_count));
            h.val_loss.push_back(nn::mse(val_pred, s.val_t));
            h.val_error.push_back(err);
            mean += err;
        }
        mean /= static_cast<double>(n_tasks);
        result.history.mean_val_error.push_back(mean);

        if (mean < best) {
            best = mean;
            result.history.best_epoch = static_cast<std::size_t>(epoch);
            result.model.trunk = current.trunk;
            result.model.heads = current.heads;
        }
        if (config.patience > 0 && static_cast<std::size_t>(epoch) - result.history.best_epoch >=
                                       static_cast<std::size_t>(config.patience)) {
            break;
        }
    }
    for (auto& h : result.history.tasks) h.best_epoch = result.history.best_epoch;
    result.model.provenance["best_epoch"] = result.history.best_epoch;
    result.model.provenance["epochs_run"] = result.history.epochs();
    result.model.provenance["train_config"] = nn::train_config_to_json(config);
    return result;
}

metrics::BatchError evaluate_multitask(const MultiTaskModel& model, const std::string& task_id,
                                       const data::LabeledDataset& dataset, data::Split split) {
    const std::size_t t = model.task_index(task_id);
    if (!(dataset.meta.spec == model.heads[t].spec)) {
        throw ConfigError("evaluate_multitask: dataset is " + dataset.meta.spec.name() + ", task is " + task_id);
    }
    return metrics::mean_spectrum_error(predict(model, t, dataset.features_of(split)), dataset.targets_of(split));
}

std::string serialize_multitask(const MultiTaskModel& model) {
    model.validate();
    nlohmann::json header;
    header["format"] = "sxfer-multitask";
    header["version"] = kMultiTaskCheckpointVersion;
    header["input_scale"] = model.input_scale;
    header["seed"] = model.seed;
    header["provenance"] = model.provenance;
    header["trunk"] = layers_to_json(model.trunk);
    auto blocks = nlohmann::json::array();
    std::string body;
    auto add = [&](const nn::DenseLayer& layer, const std::string& label) {
        for (auto& block : nn::encode_layer(layer, label)) {
            blocks.push_back(block.descriptor);
            body += block.line + "\n";
        }
    };
    for (std::size_t i = 0; i < model.trunk.size(); ++i) add(model.trunk[i], "trunk." + std::to_string(i));
    auto heads = nlohmann::json::array();
    for (const auto& head : model.heads) {
        heads.push_back({{"task_id", head.task_id},
                         {"task", data::task_to_json(head.spec)},
                         {"architecture", layers_to_json(head.layers)}});
        for (std::size_t i = 0; i < head.layers.size(); ++i) add(head.layers[i], head.task_id + "." + std::to_string(i));
    }
    header["heads"] = heads;
    header["blocks"] = blocks;
    return header.dump() + "\n" + body;
}

MultiTaskModel parse_multitask(const std::string& text) {
    const auto lines = nn::checkpoint_lines(text);
    if (lines.empty()) throw FormatError("multi-task checkpoint: empty file");
    MultiTaskModel model;
    try {
        const auto header = nlohmann::json::parse(lines[0]);
        if (header.at("format").get<std::string>() != "sxfer-multitask") {
            throw FormatError("multi-task checkpoint: wrong format tag");
        }
        const int version = header.at("version").get<int>();
        if (version != kMultiTaskCheckpointVersion) {
            throw FormatError("multi-task checkpoint: version " + std::to_string(version) + " is not supported");
        }
        model.input_scale = header.at("input_scale").get<double>();
        model.seed = header.at("seed").get<std::uint64_t>();
        model.provenance = header.at("provenance");
        const auto& blocks = header.at("blocks");
        std::size_t pos = 1, block = 0;
        auto read = [&](const nn::LayerShape& shape, const std::string& label) {
            if (block + 2 > blocks.size()) throw FormatError("multi-task checkpoint: missing block descriptors");
            auto layer = nn::decode_layer(shape, label, blocks[block], blocks[block + 1], lines, pos);
            block += 2;
            return layer;
        };
        const auto trunk = nn::architecture_from_json(header.at("trunk"));
        for (std::size_t i = 0; i < trunk.size(); ++i) model.trunk.push_back(read(trunk[i], "trunk." + std::to_string(i)));
        for (const auto& h : header.at("heads")) {
            TaskHead head{h.at("task_id").get<std::string>(), data::task_from_json(h.at("task")), {}};
            const auto arch = nn::architecture_from_json(h.at("architecture"));
            for (std::size_t i = 0; i < arch.size(); ++i) {
                head.layers.push_back(read(arch[i], head.task_id + "." + std::to_string(i)));
            }
            model.heads.push_back(std::move(head));
        }
        if (block != blocks.size() || pos != lines.size()) {
            throw FormatError("multi-task checkpoint: trailing blocks after the last head");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("multi-task checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("multi-task checkpoint: ") + e.what());
    }
    try {
        model.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("multi-task checkpoint: ") + e.what());
    }
    return model;
}

void save_multitask(const MultiTaskModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_multitask(model));
}

MultiTaskModel load_multitask(const std::filesystem::path& path) { return parse_multitask(read_file(path)); }

MultiTaskRun run_multitask(const std::vector<data::LabeledDataset>& datasets, std::size_t n_shared,
                           std::uint64_t init_seed, const nn::TrainConfig& config, const transfer::Context& ctx) {
    nlohmann::json tasks = nlohmann::json::array(), hashes = nlohmann::json::array();
    std::vector<data::TaskSpec> specs;
    for (const auto& ds : datasets) {
        specs.push_back(ds.meta.spec);
        tasks.push_back(data::task_to_json(ds.meta.spec));
        hashes.push_back(data::dataset_hash(ds));
    }
    const nlohmann::json description = {{"kind", "multitask"},        {"version", kRunCacheVersion},
                                        {"tasks", tasks},             {"datasets", hashes},
                                        {"n_shared", n_shared},       {"init_seed", init_seed},
                                        {"config", nn::train_config_to_json(config)}};
    const auto key = exp::Cache::key_of(description);
    if (auto cached = ctx.cache.load_json("runs", key)) {
        try {
            MultiTaskRun r;
            r.test_error = cached->at("test_error").get<std::vector<double>>();
            r.best_val_error = cached->at("best_val_error").get<std::vector<double>>();
            r.best_mean_val_error = cached->at("best_mean_val_error").get<double>();
            r.best_epoch = cached->at("best_epoch").get<std::size_t>();
            r.epochs_run = cached->at("epochs_run").get<std::size_t>();
            if (r.test_error.size() == datasets.size()) return r;
        } catch (const nlohmann::json::exception&) {
            // damaged entry: recompute below
        }
    }
    const auto trained = train_multitask(build_multitask(n_shared, specs, init_seed), datasets, config);
    MultiTaskRun r;
    for (std::size_t t = 0; t < datasets.size(); ++t) {
        r.test_error.push_back(evaluate_multitask(trained.model, trained.model.heads[t].task_id, datasets[t]).mean);
        r.best_val_error.push_back(trained.history.tasks[t].val_error.at(trained.history.best_epoch));
    }
    r.best_mean_val_error = trained.history.mean_val_error.at(trained.history.best_epoch);
    r.best_epoch = trained.history.best_epoch;
    r.epochs_run = trained.history.epochs();
    ctx.cache.store_json("runs", key,
                         {{"test_error", r.test_error},
                          {"best_val_error", r.best_val_error},
                          {"best_mean_val_error", r.best_mean_val_error},
                          {"best_epoch", r.best_epoch},
                          {"epochs_run", r.epochs_run}});
    return r;
}

exp::Summary SweepResult::test_summary(std::size_t depth_index, std::size_t task) const {
    return exp::summarize(test_errors.at(depth_index).at(task));
}

exp::Summary SweepResult::direct_summary(std::size_t task) const { return exp::summarize(direct_test_errors.at(task)); }

std::size_t SweepResult::best_depth_index(std::size_t task) const {
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < depths.size(); ++d) {
        const double v = exp::summarize(val_errors.at(d).at(task)).mean;
        if (v < best_val) {
            best_val = v;
            best = d;
        }
    }
    return best;
}

SweepResult sweep_shared_depth(const std::vector<data::LabeledDataset>& datasets,
                               const std::vector<std::size_t>& depths, const nn::TrainConfig& config,
                               const transfer::SeedProtocol& seeds, const transfer::Context& ctx) {
    if (depths.empty()) throw ConfigError("sweep_shared_depth: no depths");
    SweepResult out;
    for (const auto& ds : datasets) out.task_ids.push_back(ds.meta.spec.name());
    out.depths = depths;
    const std::size_t reps = seeds.replicates, n_tasks = datasets.size();
    out.test_errors.assign(depths.size(), std::vector<std::vector<double>>(n_tasks, std::vector<double>(reps)));
    out.val_errors = out.test_errors;
    out.direct_test_errors.assign(n_tasks, std::vector<double>(reps));

    std::vector<std::string> hashes;
    for (const auto& ds : datasets) hashes.push_back(data::dataset_hash(ds));
    const std::size_t mt_jobs = depths.size() * reps;
    std::mutex log_mutex;
    exp::parallel_for(mt_jobs + n_tasks * reps, ctx.jobs, [&](std::size_t job) {
        std::string message;
        if (job < mt_jobs) {
            const std::size_t d = job / reps, r = job % reps;
            const auto run = run_multitask(datasets, depths[d], seeds.replicate_seed(r),
                                           [&] {
                                               auto c = config;
                                               c.seed = seeds.replicate_seed(r);
                                               return c;
                                           }(),
                                           ctx);
            for (std::size_t t = 0; t < n_tasks; ++t) {
                out.test_errors[d][t][r] = run.test_error[t];
                out.val_errors[d][t][r] = run.best_val_error[t];
            }
            message = "multitask depth " + std::to_string(depths[d]) + " replicate " + std::to_string(r) +
                      ": mean val error " + std::to_string(run.best_mean_val_error);
        } else {
            const std::size_t t = (job - mt_jobs) / reps, r = (job - mt_jobs) % reps;
            transfer::RunSpec spec;
            spec.arch = transfer::default_architecture(datasets[t].meta.spec.kind);
            spec.init_seed = seeds.init_seed(r, transfer::TransferPlan::none());
            spec.config = config;
            spec.config.seed = seeds.replicate_seed(r);
            spec.target_hash = hashes[t];
            out.direct_test_errors[t][r] = transfer::run_finetune(datasets[t], spec, ctx).test_error;
            message = "direct " + out.task_ids[t] + " replicate " + std::to_string(r) + ": test error " +
                      std::to_string(out.direct_test_errors[t][r]);
        }
        std::lock_guard lock(log_mutex);
        ctx.note(message);
    });
    return out;
}

}  // namespace sxfer::multitask
