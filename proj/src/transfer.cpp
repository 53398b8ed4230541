#include "sxfer/transfer.hpp"

#include <cmath>
#include <mutex>
#include <set>

#include "sxfer/error.hpp"
#include "sxfer/experiment/parallel.hpp"
#include "sxfer/hash.hpp"
#include "sxfer/metrics.hpp"
#include "sxfer/nn/checkpoint.hpp"

namespace sxfer::transfer {

namespace {

constexpr int kRunCacheVersion = 1;

}  // namespace

nn::Architecture default_architecture(data::TaskKind kind) {
    const auto out = kind == data::TaskKind::Film ? nn::Activation::Sigmoid : nn::Activation::Softplus;
    return nn::make_architecture(data::kMaskWidth, kHiddenWidth, kHiddenLayers, 200, out);
}

std::size_t default_batch_size(std::size_t train_examples) { return train_examples >= 5000 ? 100 : 32; }

void TransferPlan::validate(std::size_t hidden_count) const {
    if (empty()) return;
    if (n1 < 1 || n2 < n1 || n2 > static_cast<int>(hidden_count)) {
        throw RangeError("transfer plan (" + std::to_string(n1) + ", " + std::to_string(n2) +
                         ") outside 1 <= n1 <= n2 <= " + std::to_string(hidden_count));
    }
}

std::string TransferPlan::label() const {
    if (empty()) return "none";
    return std::to_string(n1) + "-" + std::to_string(n2) + (fine_tune_all ? "" : "-frozen");
}

nlohmann::json plan_to_json(const TransferPlan& plan) {
    return {{"n1", plan.n1}, {"n2", plan.n2}, {"fine_tune_all", plan.fine_tune_all}};
}

TransferPlan plan_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("transfer plan must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "n1" && key != "n2" && key != "fine_tune_all") {
            throw ConfigError("transfer plan: unknown key '" + key + "'");
        }
    }
    try {
        TransferPlan p{doc.at("n1").get<int>(), doc.at("n2").get<int>(), doc.value("fine_tune_all", true)};
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("transfer plan: ") + e.what());
    }
}

std::vector<TransferPlan> grid_plans(std::size_t hidden_count) {
    std::vector<TransferPlan> plans;
    for (int a = 1; a <= static_cast<int>(hidden_count); ++a) {
        for (int b = a; b <= static_cast<int>(hidden_count); ++b) plans.push_back({a, b, true});
    }
    return plans;
}

std::size_t cell_index(const TransferPlan& plan, std::size_t hidden_count) {
    plan.validate(hidden_count);
    if (plan.empty()) return 0;
    const auto h = static_cast<int>(hidden_count);
    // Cells before row n1, then the offset within the row.
    const int before = (plan.n1 - 1) * h - (plan.n1 - 1) * (plan.n1 - 2) / 2;
    return static_cast<std::size_t>(before + (plan.n2 - plan.n1) + 1);
}

nn::MlpModel transfer_layers(const nn::MlpModel& base, const TransferPlan& plan, const nn::Architecture& target,
                             std::uint64_t seed) {
    const auto base_arch = base.architecture();
    if (nn::trunk_fingerprint(base_arch) != nn::trunk_fingerprint(target)) {
        throw CompatibilityError("transfer: BaseNet architecture " + nn::architecture_fingerprint(base_arch) +
                                 " does not match target " + nn::architecture_fingerprint(target));
    }
    plan.validate(base.hidden_count());

    auto model = nn::init_network(target, seed, base.input_scale);
    nlohmann::json origin = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const bool copy = l < base.hidden_count() && plan.copies(l + 1);
        if (copy) model.layers[l] = base.layers[l];
        origin.push_back(copy ? "base" : "fresh");
    }
    model.provenance["transfer"] = {{"plan", plan_to_json(plan)},
                                    {"base_fingerprint", base.fingerprint()},
                                    {"base_task", base.provenance.value("dataset_task", std::string{})},
                                    {"layer_origin", origin}};
    return model;
}

nn::MlpModel transfer_layers(const nn::MlpModel& base, const TransferPlan& plan, std::uint64_t seed) {
    return transfer_layers(base, plan, base.architecture(), seed);
}

std::vector<bool> trainable_mask(const TransferPlan& plan, std::size_t layer_count) {
    std::vector<bool> mask(layer_count, true);
    if (plan.fine_tune_all) return mask;
    for (std::size_t l = 0; l < layer_count; ++l) mask[l] = !plan.copies(l + 1);
    return mask;
}

std::string model_hash(const nn::MlpModel& model) { return sha256_hex(nn::serialize_model(model)); }

nn::MlpModel train_basenet(const data::LabeledDataset& source, const nn::Architecture& arch,
                           const nn::TrainConfig& config, std::uint64_t seed, const Context& ctx) {
    const nlohmann::json description = {{"kind", "basenet"},
                                        {"version", kRunCacheVersion},
                                        {"task", data::task_to_json(source.meta.spec)},
                                        {"dataset", data::dataset_hash(source)},
                                        {"architecture", nn::architecture_fingerprint(arch)},
                                        {"config", nn::train_config_to_json(config)},
                                        {"seed", seed}};
    const auto key = exp::Cache::key_of(description);
    if (auto cached = ctx.cache.load_model(key)) {
        ctx.note("basenet " + source.meta.spec.name() + ": cached");
        return *cached;
    }
    ctx.note("basenet " + source.meta.spec.name() + ": training on " +
             std::to_string(source.count(data::Split::Train)) + " examples");
    auto result = nn::train(nn::init_network(arch, seed), source, config);
    result.model.provenance["role"] = "basenet";
    result.model.provenance["dataset_hash"] = description["dataset"];
    result.model.provenance["test_error"] = nn::evaluate(result.model, source, data::Split::Test).mean;
    result.model.provenance["history"] = nn::history_to_json(result.history);
    ctx.cache.store_model(key, result.model);
    ctx.note("basenet " + source.meta.spec.name() + ": best val error " +
             std::to_string(result.history.best_val_error()) + " at epoch " +
             std::to_string(result.history.best_epoch));
    return result.model;
}

nlohmann::json run_to_json(const RunResult& run) {
    return {{"test_error", run.test_error},         {"test_guard_count", run.test_guard_count},
            {"best_val_error", run.best_val_error}, {"best_epoch", run.best_epoch},
            {"epochs_run", run.epochs_run},         {"history", nn::history_to_json(run.history)}};
}

RunResult run_from_json(const nlohmann::json& doc) {
    try {
        RunResult r;
        r.test_error = doc.at("test_error").get<double>();
        r.test_guard_count = doc.at("test_guard_count").get<std::size_t>();
        r.best_val_error = doc.at("best_val_error").get<double>();
        r.best_epoch = doc.at("best_epoch").get<std::size_t>();
        r.epochs_run = doc.at("epochs_run").get<std::size_t>();
        r.history = nn::history_from_json(doc.at("history"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("run result: ") + e.what());
    }
}

nlohmann::json run_description(const data::LabeledDataset& target, const RunSpec& spec) {
    const bool direct = spec.base == nullptr || spec.plan.empty();
    nlohmann::json base = nullptr;
    if (!direct) base = spec.base_hash.empty() ? model_hash(*spec.base) : spec.base_hash;
    return {{"kind", "finetune"},
            {"version", kRunCacheVersion},
            {"task", data::task_to_json(target.meta.spec)},
            {"dataset", spec.target_hash.empty() ? data::dataset_hash(target) : spec.target_hash},
            {"architecture", nn::architecture_fingerprint(spec.arch)},
            {"config", nn::train_config_to_json(spec.config)},
            {"init_seed", spec.init_seed},
            {"plan", plan_to_json(direct ? TransferPlan::none() : spec.plan)},
            {"base", base}};
}

RunResult run_finetune(const data::LabeledDataset& target, const RunSpec& spec, const Context& ctx) {
    const auto key = exp::Cache::key_of(run_description(target, spec));
    if (auto cached = ctx.cache.load_json("runs", key)) {
        try {
            auto r = run_from_json(*cached);
            if (!spec.keep_model) return r;
            if ((r.model = ctx.cache.load_model(key))) return r;
        } catch (const FormatError&) {
            // damaged entry: recompute below
        }
    }
    const bool direct = spec.base == nullptr || spec.plan.empty();
    const auto model =
        direct ? nn::init_network(spec.arch, spec.init_seed) : transfer_layers(*spec.base, spec.plan, spec.arch, spec.init_seed);
    const auto mask = direct ? std::vector<bool>{} : trainable_mask(spec.plan, model.layers.size());
    const auto trained = nn::train(model, target, spec.config, mask);
    const auto test = nn::evaluate(trained.model, target, data::Split::Test);

    RunResult r;
    r.test_error = test.mean;
    r.test_guard_count = test.guard_count;
    r.best_val_error = trained.history.best_val_error();
    r.best_epoch = trained.history.best_epoch;
    r.epochs_run = trained.history.epochs();
    r.history = trained.history;
    if (spec.keep_model) {
        r.model = trained.model;
        ctx.cache.store_model(key, trained.model);
    }
    ctx.cache.store_json("runs", key, run_to_json(r));
    return r;
}

std::vector<RunResult> run_direct(const data::LabeledDataset& target, const TransferSetup& setup, const Context& ctx) {
    const auto target_hash = data::dataset_hash(target);
    std::vector<RunResult> runs(setup.seeds.replicates);
    exp::parallel_for(runs.size(), ctx.jobs, [&](std::size_t r) {
        RunSpec spec;
        spec.arch = setup.target_arch;
        spec.init_seed = setup.seeds.init_seed(r, TransferPlan::none());
        spec.config = setup.target_config;
        spec.config.seed = setup.seeds.replicate_seed(r);
        spec.target_hash = target_hash;
        runs[r] = run_finetune(target, spec, ctx);
    });
    return runs;
}

std::optional<std::size_t> TransferReport::best_cell() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].failed) continue;
        if (!best || cells[i].summary.mean < cells[*best].summary.mean) best = i;
    }
    return best;
}

std::vector<std::size_t> TransferReport::negative_cells() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i].failed && cells[i].negative) out.push_back(i);
    }
    return out;
}

bool TransferReport::any_failed() const {
    for (const auto& c : cells) {
        if (c.failed) return true;
    }
    return false;
}

void TransferReport::validate() const {
    const auto d = exp::summarize(direct_errors);
    if (d.mean != direct.mean || d.count != direct.count) throw ValidationError("transfer report: direct summary is stale");
    for (const auto& c : cells) {
        if (c.failed) continue;
        const auto s = exp::summarize(c.errors);
        if (s.mean != c.summary.mean) throw ValidationError("transfer report: cell " + c.plan.label() + " summary is stale");
        if (c.reduction != metrics::relative_reduction(direct.mean, s.mean)) {
            throw ValidationError("transfer report: cell " + c.plan.label() + " reduction disagrees with its errors");
        }
        if (c.negative != (s.mean > direct.mean)) {
            throw ValidationError("transfer report: cell " + c.plan.label() + " negative-transfer flag is wrong");
        }
    }
}

nlohmann::json report_to_json(const TransferReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"n1", c.plan.n1},
                         {"n2", c.plan.n2},
                         {"errors", c.errors},
                         {"mean", c.summary.mean},
                         {"std", c.summary.stddev},
                         {"reduction", c.reduction},
                         {"negative", c.negative},
                         {"failed", c.failed},
                         {"failure", c.failure}});
    }
    return {{"source_task", report.source_task}, {"target_task", report.target_task},
            {"source_hash", report.source_hash}, {"target_hash", report.target_hash},
            {"base_hash", report.base_hash},     {"direct_errors", report.direct_errors},
            {"direct_mean", report.direct.mean}, {"direct_std", report.direct.stddev},
            {"cells", cells}};
}

TransferReport evaluate_plans(const nn::MlpModel& base, const data::LabeledDataset& target,
                              const std::vector<TransferPlan>& plans, const TransferSetup& setup,
                              const Context& ctx) {
    for (const auto& plan : plans) {
        plan.validate(base.hidden_count());
        if (plan.empty()) throw ConfigError("transfer: the empty plan is the direct baseline, not a cell");
    }
    // Fails early on incompatible architectures rather than once per cell.
    transfer_layers(base, plans.empty() ? TransferPlan::first(1) : plans.front(), setup.target_arch, 0);

    TransferReport report;
    report.source_task = base.provenance.value("dataset_task", std::string{});
    report.source_hash = base.provenance.value("dataset_hash", std::string{});
    report.target_task = target.meta.spec.name();
    report.target_hash = data::dataset_hash(target);
    report.base_hash = model_hash(base);

    const std::size_t reps = setup.seeds.replicates;
    const std::size_t n_jobs = reps * (plans.size() + 1);
    std::vector<RunResult> results(n_jobs);
    std::vector<std::string> failures(n_jobs);
    std::mutex log_mutex;
    exp::parallel_for(n_jobs, ctx.jobs, [&](std::size_t job) {
        const std::size_t r = job % reps;
        const std::size_t cell = job / reps;  // 0 is the direct baseline
        RunSpec spec;
        spec.base = &base;
        spec.plan = cell == 0 ? TransferPlan::none() : plans[cell - 1];
        spec.arch = setup.target_arch;
        spec.init_seed = setup.seeds.init_seed(r, spec.plan);
        spec.config = setup.target_config;
        spec.config.seed = setup.seeds.replicate_seed(r);
        spec.base_hash = report.base_hash;
        spec.target_hash = report.target_hash;
        try {
            results[job] = run_finetune(target, spec, ctx);
        } catch (const Error& e) {
            if (cell == 0) throw;
            failures[job] = e.what();
        }
        std::lock_guard lock(log_mutex);
        ctx.note(report.target_task + " plan " + spec.plan.label() + " replicate " + std::to_string(r) + ": " +
                 (failures[job].empty() ? "test error " + std::to_string(results[job].test_error)
                                        : "failed: " + failures[job]));
    });

    for (std::size_t r = 0; r < reps; ++r) report.direct_errors.push_back(results[r].test_error);
    report.direct = exp::summarize(report.direct_errors);
    for (std::size_t p = 0; p < plans.size(); ++p) {
        CellResult c;
        c.plan = plans[p];
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t job = (p + 1) * reps + r;
            if (!failures[job].empty()) {
                c.failed = true;
                if (c.failure.empty()) c.failure = "replicate " + std::to_string(r) + ": " + failures[job];
                continue;
            }
            c.errors.push_back(results[job].test_error);
        }
        if (!c.failed) {
            c.summary = exp::summarize(c.errors);
            c.reduction = metrics::relative_reduction(report.direct.mean, c.summary.mean);
            c.negative = c.summary.mean > report.direct.mean;
        }
        report.cells.push_back(std::move(c));
    }
    return report;
}

TransferReport run_transfer_experiment(const data::LabeledDataset& source, const data::LabeledDataset& target,
                                       const std::vector<TransferPlan>& plans, const SourceSetup& source_setup,
                                       const TransferSetup& setup, const Context& ctx) {
    const auto base = train_basenet(source, source_setup.arch, source_setup.config, source_setup.seed, ctx);
    return evaluate_plans(base, target, plans, setup, ctx);
}

TransferReport grid_search_transfer(const nn::MlpModel& base, const data::LabeledDataset& target,
                                    const TransferSetup& setup, const Context& ctx) {
    return evaluate_plans(base, target, grid_plans(base.hidden_count()), setup, ctx);
}

}  // namespace sxfer::transfer
