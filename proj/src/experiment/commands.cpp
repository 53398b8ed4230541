#include "sxfer/experiment/commands.hpp"

#include <cmath>
#include <limits>

#include "sxfer/error.hpp"
#include "sxfer/experiment/report.hpp"
#include "sxfer/experiment/stats.hpp"
#include "sxfer/experiment/svg.hpp"
#include "sxfer/io.hpp"
#include "sxfer/metrics.hpp"
#include "sxfer/multitask.hpp"
#include "sxfer/nn/checkpoint.hpp"
#include "sxfer/version.hpp"

namespace sxfer::exp {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDirectColor = "#000000";
constexpr const char* kTransferColor = "#d62728";
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

const DatasetRef& require(const std::optional<DatasetRef>& ref, const char* command, const char* key) {
    if (!ref) throw ConfigError(std::string(command) + ": config needs '" + key + "'");
    return *ref;
}

nlohmann::json base_document(const char* command, const CommandContext& ctx) {
    return {{"command", command},
            {"version", kVersion},
            {"config_hash", config_hash(ctx.config)},
            {"config", config_to_json(ctx.config)},
            {"datasets", nlohmann::json::object()}};
}

void add_dataset(nlohmann::json& doc, const DatasetRef& ref, const data::LabeledDataset& ds) {
    doc["datasets"][ref.label()] = data::dataset_hash(ds);
}

transfer::TransferSetup target_setup(const CommandContext& ctx, const data::LabeledDataset& target) {
    return {transfer::default_architecture(target.meta.spec.kind),
            ctx.config.train.resolve(target.count(data::Split::Train)), ctx.config.seed_protocol()};
}

nn::MlpModel basenet_for(const CommandContext& ctx, const data::LabeledDataset& source) {
    return transfer::train_basenet(source, transfer::default_architecture(source.meta.spec.kind),
                                   ctx.config.source_train.resolve(source.count(data::Split::Train)),
                                   ctx.config.seed, ctx.run);
}

std::vector<transfer::TransferPlan> plans_or(const ExperimentConfig& c, std::vector<transfer::TransferPlan> fallback) {
    return c.plans.empty() ? fallback : c.plans;
}

ReportMeta meta_of(const nlohmann::json& doc) {
    ReportMeta m;
    m.command = doc.at("command").get<std::string>();
    m.config_hash = doc.at("config_hash").get<std::string>();
    for (const auto& [label, hash] : doc.at("datasets").items()) m.dataset_hashes.emplace_back(label, hash.get<std::string>());
    return m;
}

std::vector<double> get_doubles(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

std::string pct_label(const std::string& what) { return what + " (%)"; }

std::vector<double> scaled(std::vector<double> v, double k) {
    for (auto& x : v) x *= k;
    return v;
}

struct Output {
    fs::path dir;
    std::vector<fs::path> written;

    void put(const std::string& name, const std::string& content) {
        const auto path = dir / name;
        write_file_atomic(path, content);
        written.push_back(path);
    }
};

// ---- renderers -----------------------------------------------------------

void render_gen_data(const nlohmann::json& doc, Output& out) {
    CsvTable t({"dataset", "size", "hash", "file"});
    for (const auto& f : doc.at("files")) {
        t.row({f.at("label"), cell(f.at("size").get<std::size_t>()), f.at("hash"), f.at("file")});
    }
    out.put("gen-data.csv", t.render(meta_of(doc)));
}

void render_train(const nlohmann::json& doc, Output& out) {
    CsvTable t({"replicate", "init_seed", "train_seed", "test_error", "best_val_error", "best_epoch", "epochs_run"});
    for (const auto& r : doc.at("runs")) {
        t.row({cell(r.at("replicate").get<std::size_t>()), cell(r.at("init_seed").get<std::size_t>()),
               cell(r.at("train_seed").get<std::size_t>()), cell(r.at("test_error").get<double>()),
               cell(r.at("best_val_error").get<double>()), cell(r.at("best_epoch").get<std::size_t>()),
               cell(r.at("epochs_run").get<std::size_t>())});
    }
    auto meta = meta_of(doc);
    meta.extra = {{"method", doc.at("method")},
                  {"mean_test_error", cell(doc.at("mean").get<double>())},
                  {"std_test_error", cell(doc.at("std").get<double>())}};
    out.put("train.csv", t.render(meta));

    svg::LinePlot plot{"Validation spectrum error, " + doc.at("target_task").get<std::string>(), "epoch",
                       pct_label("validation error"), false, {}, 640, 420};
    std::size_t k = 0;
    for (const auto& r : doc.at("runs")) {
        const auto val = get_doubles(r.at("history").at("val_error"));
        svg::Series s{"replicate " + std::to_string(k), {}, scaled(val, 100.0), {}, kPalette[k % 8], false, false};
        for (std::size_t e = 0; e < val.size(); ++e) s.x.push_back(static_cast<double>(e + 1));
        plot.series.push_back(std::move(s));
        ++k;
    }
    out.put("train.svg", svg::render(plot));
}

CsvTable transfer_table(const nlohmann::json& report) {
    CsvTable t({"n1", "n2", "mean_error", "std_error", "reduction", "negative_transfer", "failed", "errors"});
    auto join = [](const nlohmann::json& errs) {
        std::string s;
        for (const auto& e : errs) s += (s.empty() ? "" : ";") + cell(e.get<double>());
        return s;
    };
    t.row({"0", "0", cell(report.at("direct_mean").get<double>()), cell(report.at("direct_std").get<double>()), "0", "0",
           "0", join(report.at("direct_errors"))});
    for (const auto& c : report.at("cells")) {
        const bool failed = c.at("failed").get<bool>();
        t.row({cell(c.at("n1").get<int>()), cell(c.at("n2").get<int>()),
               failed ? "nan" : cell(c.at("mean").get<double>()), failed ? "nan" : cell(c.at("std").get<double>()),
               failed ? "nan" : cell(c.at("reduction").get<double>()), cell(c.at("negative").get<bool>()), cell(failed),
               join(c.at("errors"))});
    }
    return t;
}

ReportMeta transfer_meta(const nlohmann::json& doc) {
    auto meta = meta_of(doc);
    const auto& r = doc.at("report");
    meta.extra = {{"source_task", r.at("source_task")},
                  {"target_task", r.at("target_task")},
                  {"basenet_hash", r.at("base_hash")},
                  {"row_0_0", "direct learning baseline"}};
    return meta;
}

void render_transfer(const nlohmann::json& doc, Output& out) {
    const auto& r = doc.at("report");
    out.put("transfer.csv", transfer_table(r).render(transfer_meta(doc)));

    svg::LinePlot plot{"Transfer " + r.at("source_task").get<std::string>() + " -> " +
                           r.at("target_task").get<std::string>(),
                       "transferred layers n2 (from n1 = 1)", pct_label("test spectrum error"), false, {}, 640, 420};
    svg::Series tr{"transfer", {}, {}, {}, kTransferColor, false, true};
    for (const auto& c : r.at("cells")) {
        if (c.at("n1").get<int>() != 1 || c.at("failed").get<bool>()) continue;
        tr.x.push_back(c.at("n2").get<double>());
        tr.y.push_back(100.0 * c.at("mean").get<double>());
        tr.err.push_back(100.0 * c.at("std").get<double>());
    }
    if (!tr.x.empty()) {
        const double d = 100.0 * r.at("direct_mean").get<double>();
        svg::Series direct{"direct", {tr.x.front(), tr.x.back()}, {d, d}, {}, kDirectColor, true, false};
        plot.series.push_back(direct);
        plot.series.push_back(tr);
    }
    out.put("transfer.svg", svg::render(plot));
}

void render_grid(const nlohmann::json& doc, Output& out) {
    const auto& r = doc.at("report");
    out.put("grid.csv", transfer_table(r).render(transfer_meta(doc)));

    CsvTable status({"n1", "n2", "status", "message"});
    for (const auto& c : r.at("cells")) {
        status.row({cell(c.at("n1").get<int>()), cell(c.at("n2").get<int>()),
                    c.at("failed").get<bool>() ? "failed" : "ok", c.at("failure").get<std::string>()});
    }
    out.put("grid_status.csv", status.render(meta_of(doc)));

    const std::size_t h = transfer::kHiddenLayers;
    svg::Heatmap map;
    map.title = "Grid search " + r.at("source_task").get<std::string>() + " -> " + r.at("target_task").get<std::string>() +
                ", direct " + cell(100.0 * r.at("direct_mean").get<double>()) + "% (* negative transfer)";
    map.row_label = "n2 (last transferred layer)";
    map.col_label = "n1 (first transferred layer)";
    for (std::size_t i = 1; i <= h; ++i) {
        map.rows.push_back(std::to_string(i));
        map.cols.push_back(std::to_string(i));
    }
    map.values.assign(h, std::vector<double>(h, std::numeric_limits<double>::quiet_NaN()));
    map.center = r.at("direct_mean").get<double>();
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_at{h, h};
    for (const auto& c : r.at("cells")) {
        if (c.at("failed").get<bool>()) continue;
        const auto n1 = c.at("n1").get<std::size_t>(), n2 = c.at("n2").get<std::size_t>();
        const double v = c.at("mean").get<double>();
        map.values[n2 - 1][n1 - 1] = v;
        if (c.at("negative").get<bool>()) map.marked.emplace_back(n2 - 1, n1 - 1);
        if (v < best) {
            best = v;
            best_at = {n2 - 1, n1 - 1};
        }
    }
    if (best_at.first < h) map.outlined.push_back(best_at);
    out.put("grid.svg", svg::render(map));
}

void render_multitask(const nlohmann::json& doc, Output& out) {
    const auto& tasks = doc.at("tasks");
    CsvTable table({"task", "direct_mean", "direct_std", "best_shared_depth", "multitask_mean", "multitask_std",
                    "relative_reduction"});
    for (const auto& t : tasks) {
        table.row({t.at("task"), cell(t.at("direct_mean").get<double>()), cell(t.at("direct_std").get<double>()),
                   cell(t.at("best_depth").get<std::size_t>()), cell(t.at("multitask_mean").get<double>()),
                   cell(t.at("multitask_std").get<double>()), cell(t.at("reduction").get<double>())});
    }
    auto meta = meta_of(doc);
    meta.extra = {{"depth_selection", "lowest mean validation error per task"}};
    out.put("multitask_table.csv", table.render(meta));

    CsvTable sweep({"n_shared", "task", "test_mean", "test_std", "val_mean"});
    svg::LinePlot plot{"Multi-task error vs shared depth", "shared hidden layers", pct_label("test spectrum error"),
                       false, {}, 640, 420};
    std::size_t k = 0;
    for (const auto& t : tasks) {
        svg::Series s{t.at("task").get<std::string>(), {}, {}, {}, kPalette[k % 8], false, true};
        for (const auto& d : t.at("depths")) {
            sweep.row({cell(d.at("n_shared").get<std::size_t>()), t.at("task"), cell(d.at("test_mean").get<double>()),
                       cell(d.at("test_std").get<double>()), cell(d.at("val_mean").get<double>())});
            s.x.push_back(d.at("n_shared").get<double>());
            s.y.push_back(100.0 * d.at("test_mean").get<double>());
            s.err.push_back(100.0 * d.at("test_std").get<double>());
        }
        const double direct = 100.0 * t.at("direct_mean").get<double>();
        if (!s.x.empty()) {
            plot.series.push_back({t.at("task").get<std::string>() + " direct", {s.x.front(), s.x.back()},
                                   {direct, direct}, {}, kPalette[k % 8], true, false});
        }
        plot.series.push_back(std::move(s));
        ++k;
    }
    out.put("multitask_sweep.csv", sweep.render(meta_of(doc)));
    out.put("multitask_sweep.svg", svg::render(plot));
}

void render_ablation(const nlohmann::json& doc, Output& out) {
    CsvTable t({"method", "reg_type", "value", "mean_error", "std_error", "transfer_below_direct"});
    for (const auto& row : doc.at("settings")) {
        const bool below = row.at("transfer_mean").get<double>() < row.at("direct_mean").get<double>();
        for (const char* method : {"direct", "transfer"}) {
            const std::string m = method;
            t.row({m, row.at("reg_type"), cell(row.at("value").get<double>()), cell(row.at(m + "_mean").get<double>()),
                   cell(row.at(m + "_std").get<double>()), cell(below)});
        }
    }
    auto meta = meta_of(doc);
    meta.extra = {{"plan", doc.at("plan")}};
    out.put("ablation.csv", t.render(meta));

    for (const std::string type : {"l2", "l1", "dropout"}) {
        const bool dropout = type == "dropout";
        svg::LinePlot plot{"Regularization: " + type, dropout ? "keep_prob" : type + " lambda",
                           pct_label("test spectrum error"), !dropout, {}, 640, 420};
        svg::Series direct{"direct", {}, {}, {}, kDirectColor, false, true};
        svg::Series tr{"transfer", {}, {}, {}, kTransferColor, false, true};
        for (const auto& row : doc.at("settings")) {
            if (row.at("reg_type") != type) continue;
            const double v = row.at("value").get<double>();
            if (!dropout && !(v > 0)) continue;
            direct.x.push_back(v);
            tr.x.push_back(v);
            direct.y.push_back(100.0 * row.at("direct_mean").get<double>());
            direct.err.push_back(100.0 * row.at("direct_std").get<double>());
            tr.y.push_back(100.0 * row.at("transfer_mean").get<double>());
            tr.err.push_back(100.0 * row.at("transfer_std").get<double>());
        }
        if (direct.x.empty()) continue;
        plot.series = {direct, tr};
        out.put("ablation_" + type + ".svg", svg::render(plot));
    }
}

void render_datasize(const nlohmann::json& doc, Output& out) {
    CsvTable t({"size", "train_examples", "mean_error", "std_error", "non_increasing_within_1std", "errors"});
    svg::LinePlot plot{"Direct learning vs dataset size, " + doc.at("task").get<std::string>(), "dataset size",
                       pct_label("test spectrum error"), true, {}, 640, 420};
    svg::Series s{"direct", {}, {}, {}, kDirectColor, false, true};
    for (const auto& p : doc.at("points")) {
        std::string errs;
        for (const auto& e : p.at("errors")) errs += (errs.empty() ? "" : ";") + cell(e.get<double>());
        t.row({cell(p.at("size").get<std::size_t>()), cell(p.at("train_examples").get<std::size_t>()),
               cell(p.at("mean").get<double>()), cell(p.at("std").get<double>()),
               cell(p.at("non_increasing").get<bool>()), errs});
        s.x.push_back(p.at("size").get<double>());
        s.y.push_back(100.0 * p.at("mean").get<double>());
        s.err.push_back(100.0 * p.at("std").get<double>());
    }
    plot.series.push_back(s);
    auto meta = meta_of(doc);
    meta.extra = {{"non_increasing_rule", "mean(size_k) <= mean(size_k-1) + max(std_k-1, std_k)"}};
    out.put("datasize.csv", t.render(meta));
    out.put("datasize.svg", svg::render(plot));
}

void render_predict(const nlohmann::json& doc, Output& out) {
    CsvTable t({"structure", "wavelength_nm", "predicted", "exact"});
    std::size_t i = 0;
    for (const auto& s : doc.at("structures")) {
        const auto wl = get_doubles(s.at("wavelengths"));
        const auto pred = get_doubles(s.at("predicted"));
        const auto exact = get_doubles(s.at("exact"));
        for (std::size_t k = 0; k < wl.size(); ++k) {
            t.row({cell(i), cell(wl[k]), cell(pred[k]), cell(exact[k])});
        }
        std::string thick;
        for (const auto& d : s.at("thicknesses")) thick += (thick.empty() ? "" : ", ") + cell(d.get<double>());
        svg::LinePlot plot{"Structure " + std::to_string(i) + " [" + thick + "] nm, error " +
                               cell(100.0 * s.at("error").get<double>()) + "%",
                           "wavelength (nm)", doc.at("quantity").get<std::string>(), false, {}, 640, 420};
        plot.series.push_back({"exact", wl, exact, {}, kDirectColor, false, false});
        plot.series.push_back({"predicted", wl, pred, {}, kTransferColor, false, false});
        out.put("predict_" + std::to_string(i) + ".svg", svg::render(plot));
        ++i;
    }
    auto meta = meta_of(doc);
    meta.extra = {{"checkpoint_fingerprint", doc.at("fingerprint")}, {"task", doc.at("task")}};
    out.put("predict.csv", t.render(meta));
}

}  // namespace

data::LabeledDataset obtain_dataset(const DatasetRef& ref, const transfer::Context& ctx) {
    const nlohmann::json description = {{"kind", "dataset"},
                                        {"format", data::kDatasetFormatVersion},
                                        {"generator", data::kGeneratorVersion},
                                        {"task", data::task_to_json(ref.task)},
                                        {"size", ref.size},
                                        {"seed", ref.seed}};
    const auto key = Cache::key_of(description);
    if (auto cached = ctx.cache.load_dataset(key)) {
        if (cached->meta.spec == ref.task && cached->size() == ref.size && cached->meta.seed == ref.seed) return *cached;
    }
    ctx.note("generating " + ref.label());
    auto ds = data::generate_dataset(ref.task, ref.size, ref.seed, ctx.jobs);
    ctx.cache.store_dataset(key, ds);
    return ds;
}

nlohmann::json cmd_gen_data(const CommandContext& ctx) {
    const auto& ref = require(ctx.config.dataset, "gen-data", "dataset");
    auto doc = base_document("gen-data", ctx);
    const auto ds = obtain_dataset(ref, ctx.run);
    const auto name = ref.label() + ".csv";
    fs::create_directories(ctx.out_dir);
    data::save_dataset(ds, ctx.out_dir / name);
    add_dataset(doc, ref, ds);
    doc["files"] = nlohmann::json::array(
        {{{"label", ref.label()}, {"size", ref.size}, {"hash", data::dataset_hash(ds)}, {"file", name}}});
    return doc;
}

nlohmann::json cmd_train(const CommandContext& ctx) {
    const auto& target_ref = require(ctx.config.target, "train", "target");
    auto doc = base_document("train", ctx);
    const auto target = obtain_dataset(target_ref, ctx.run);
    add_dataset(doc, target_ref, target);
    const auto setup = target_setup(ctx, target);

    // With a source and a plan the exported network is a TransferNet.
    std::optional<nn::MlpModel> base;
    transfer::TransferPlan plan = transfer::TransferPlan::none();
    if (ctx.config.source && !ctx.config.plans.empty()) {
        const auto source = obtain_dataset(*ctx.config.source, ctx.run);
        add_dataset(doc, *ctx.config.source, source);
        base = basenet_for(ctx, source);
        plan = ctx.config.plans.front();
    }
    doc["method"] = plan.empty() ? "direct" : "transfer " + plan.label();
    doc["target_task"] = target.meta.spec.name();

    const auto target_hash = data::dataset_hash(target);
    std::vector<transfer::RunResult> runs(setup.seeds.replicates);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        transfer::RunSpec spec;
        spec.base = base ? &*base : nullptr;
        spec.plan = plan;
        spec.arch = setup.target_arch;
        spec.init_seed = setup.seeds.init_seed(r, plan);
        spec.config = setup.target_config;
        spec.config.seed = setup.seeds.replicate_seed(r);
        spec.target_hash = target_hash;
        spec.keep_model = r == 0;
        runs[r] = transfer::run_finetune(target, spec, ctx.run);
        ctx.run.note("train " + doc["method"].get<std::string>() + " replicate " + std::to_string(r) +
                     ": test error " + std::to_string(runs[r].test_error));
    }
    const std::string ckpt = (plan.empty() ? "direct-" : "transfer-") + target.meta.spec.name() + ".ckpt";
    fs::create_directories(ctx.out_dir);
    nn::save_model(*runs.front().model, ctx.out_dir / ckpt);

    std::vector<double> errors;
    doc["runs"] = nlohmann::json::array();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        errors.push_back(runs[r].test_error);
        doc["runs"].push_back({{"replicate", r},
                               {"init_seed", setup.seeds.init_seed(r, plan)},
                               {"train_seed", setup.seeds.replicate_seed(r)},
                               {"test_error", runs[r].test_error},
                               {"best_val_error", runs[r].best_val_error},
                               {"best_epoch", runs[r].best_epoch},
                               {"epochs_run", runs[r].epochs_run},
                               {"history", nn::history_to_json(runs[r].history)}});
    }
    const auto s = summarize(errors);
    doc["mean"] = s.mean;
    doc["std"] = s.stddev;
    doc["checkpoint"] = ckpt;
    return doc;
}

nlohmann::json cmd_transfer(const CommandContext& ctx) {
    const auto& source_ref = require(ctx.config.source, "transfer", "source");
    const auto& target_ref = require(ctx.config.target, "transfer", "target");
    auto doc = base_document("transfer", ctx);
    const auto source = obtain_dataset(source_ref, ctx.run);
    const auto target = obtain_dataset(target_ref, ctx.run);
    add_dataset(doc, source_ref, source);
    add_dataset(doc, target_ref, target);
    const auto base = basenet_for(ctx, source);
    std::vector<transfer::TransferPlan> first_n;
    for (int n = 1; n <= static_cast<int>(transfer::kHiddenLayers); ++n) first_n.push_back(transfer::TransferPlan::first(n));
    const auto report = transfer::evaluate_plans(base, target, plans_or(ctx.config, first_n), target_setup(ctx, target), ctx.run);
    report.validate();
    doc["report"] = transfer::report_to_json(report);
    doc["failed"] = report.any_failed();
    return doc;
}

nlohmann::json cmd_grid_search(const CommandContext& ctx) {
    const auto& source_ref = require(ctx.config.source, "grid-search", "source");
    const auto& target_ref = require(ctx.config.target, "grid-search", "target");
    auto doc = base_document("grid-search", ctx);
    const auto source = obtain_dataset(source_ref, ctx.run);
    const auto target = obtain_dataset(target_ref, ctx.run);
    add_dataset(doc, source_ref, source);
    add_dataset(doc, target_ref, target);
    const auto base = basenet_for(ctx, source);
    const auto report = transfer::grid_search_transfer(base, target, target_setup(ctx, target), ctx.run);
    report.validate();
    doc["report"] = transfer::report_to_json(report);
    doc["failed"] = report.any_failed();
    return doc;
}

nlohmann::json cmd_multitask(const CommandContext& ctx) {
    if (ctx.config.tasks.size() < 2) throw ConfigError("multitask: config needs at least two 'tasks'");
    auto doc = base_document("multitask", ctx);
    std::vector<data::LabeledDataset> sets;
    for (const auto& ref : ctx.config.tasks) {
        sets.push_back(obtain_dataset(ref, ctx.run));
        add_dataset(doc, ref, sets.back());
    }
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& ds : sets) smallest = std::min(smallest, ds.count(data::Split::Train));
    const auto config = ctx.config.train.resolve(smallest);
    const auto sweep =
        multitask::sweep_shared_depth(sets, ctx.config.shared_depths, config, ctx.config.seed_protocol(), ctx.run);

    doc["tasks"] = nlohmann::json::array();
    for (std::size_t t = 0; t < sets.size(); ++t) {
        const auto direct = sweep.direct_summary(t);
        const auto best = sweep.best_depth_index(t);
        const auto mt = sweep.test_summary(best, t);
        nlohmann::json depths = nlohmann::json::array();
        for (std::size_t d = 0; d < sweep.depths.size(); ++d) {
            const auto s = sweep.test_summary(d, t);
            depths.push_back({{"n_shared", sweep.depths[d]},
                              {"test_mean", s.mean},
                              {"test_std", s.stddev},
                              {"test_errors", sweep.test_errors[d][t]},
                              {"val_mean", summarize(sweep.val_errors[d][t]).mean}});
        }
        doc["tasks"].push_back({{"task", sweep.task_ids[t]},
                                {"direct_mean", direct.mean},
                                {"direct_std", direct.stddev},
                                {"direct_errors", sweep.direct_test_errors[t]},
                                {"best_depth", sweep.depths[best]},
                                {"multitask_mean", mt.mean},
                                {"multitask_std", mt.stddev},
                                {"reduction", metrics::relative_reduction(direct.mean, mt.mean)},
                                {"depths", depths}});
    }
    return doc;
}

nlohmann::json cmd_ablate_reg(const CommandContext& ctx) {
    const auto& source_ref = require(ctx.config.source, "ablate-reg", "source");
    const auto& target_ref = require(ctx.config.target, "ablate-reg", "target");
    auto doc = base_document("ablate-reg", ctx);
    const auto source = obtain_dataset(source_ref, ctx.run);
    const auto target = obtain_dataset(target_ref, ctx.run);
    add_dataset(doc, source_ref, source);
    add_dataset(doc, target_ref, target);
    const auto base = basenet_for(ctx, source);
    const auto plan = plans_or(ctx.config, {transfer::TransferPlan::first(6)}).front();
    doc["plan"] = plan.label();

    struct Setting {
        std::string type;
        double value;
    };
    std::vector<Setting> settings = {{"none", 0.0}};
    for (double v : ctx.config.l2_grid) settings.push_back({"l2", v});
    for (double v : ctx.config.l1_grid) settings.push_back({"l1", v});
    for (double v : ctx.config.keep_probs) settings.push_back({"dropout", v});

    doc["settings"] = nlohmann::json::array();
    for (const auto& s : settings) {
        auto setup = target_setup(ctx, target);
        if (s.type == "l2") setup.target_config.l2_lambda = s.value;
        if (s.type == "l1") setup.target_config.l1_lambda = s.value;
        if (s.type == "dropout") setup.target_config.keep_prob = s.value;
        const auto report = transfer::evaluate_plans(base, target, {plan}, setup, ctx.run);
        const auto& cell = report.cells.front();
        if (cell.failed) throw TrainingError("ablate-reg: transfer run failed at " + s.type + ": " + cell.failure);
        doc["settings"].push_back({{"reg_type", s.type},
                                   {"value", s.value},
                                   {"direct_mean", report.direct.mean},
                                   {"direct_std", report.direct.stddev},
                                   {"direct_errors", report.direct_errors},
                                   {"transfer_mean", cell.summary.mean},
                                   {"transfer_std", cell.summary.stddev},
                                   {"transfer_errors", cell.errors}});
    }
    return doc;
}

nlohmann::json cmd_sweep_datasize(const CommandContext& ctx) {
    const auto& target_ref = require(ctx.config.target, "sweep-datasize", "target");
    auto doc = base_document("sweep-datasize", ctx);
    doc["task"] = target_ref.task.name();
    doc["points"] = nlohmann::json::array();
    double prev_mean = 0.0, prev_std = 0.0;
    bool first = true;
    for (std::size_t size : ctx.config.sizes) {
        DatasetRef ref = target_ref;
        ref.size = size;
        const auto ds = obtain_dataset(ref, ctx.run);
        add_dataset(doc, ref, ds);
        const auto runs = transfer::run_direct(ds, target_setup(ctx, ds), ctx.run);
        std::vector<double> errors;
        for (const auto& r : runs) errors.push_back(r.test_error);
        const auto s = summarize(errors);
        const bool ok = first || s.mean <= prev_mean + std::max(prev_std, s.stddev);
        doc["points"].push_back({{"size", size},
                                 {"train_examples", ds.count(data::Split::Train)},
                                 {"mean", s.mean},
                                 {"std", s.stddev},
                                 {"errors", errors},
                                 {"non_increasing", ok}});
        prev_mean = s.mean;
        prev_std = s.stddev;
        first = false;
    }
    return doc;
}

nlohmann::json cmd_predict(const CommandContext& ctx) {
    if (ctx.config.checkpoint.empty()) throw ConfigError("predict: config needs 'checkpoint'");
    if (ctx.config.structures.empty()) throw ConfigError("predict: config needs 'structures'");
    auto doc = base_document("predict", ctx);
    const auto model = nn::load_model(ctx.config.checkpoint);
    data::TaskSpec task;
    if (ctx.config.target) {
        task = ctx.config.target->task;
    } else if (model.provenance.contains("task")) {
        task = data::task_from_json(model.provenance["task"]);
    } else {
        throw ConfigError("predict: checkpoint does not record its task; set 'target'");
    }
    doc["fingerprint"] = model.fingerprint();
    doc["task"] = task.name();
    doc["quantity"] = task.kind == data::TaskKind::Film ? "transmittance" : "Q_sca";
    doc["structures"] = nlohmann::json::array();
    for (const auto& thicknesses : ctx.config.structures) {
        if (thicknesses.size() != static_cast<std::size_t>(task.layer_count)) {
            throw ValidationError("predict: structure has " + std::to_string(thicknesses.size()) + " layers, task " +
                                  task.name() + " needs " + std::to_string(task.layer_count));
        }
        const auto input = data::mask_input(thicknesses, model.input_width());
        const auto out = nn::forward(model, input);
        const auto exact = data::exact_spectrum(task, thicknesses);
        std::vector<double> pred(out.data(), out.data() + out.size());
        doc["structures"].push_back({{"thicknesses", thicknesses},
                                     {"wavelengths", exact.wavelengths},
                                     {"predicted", pred},
                                     {"exact", exact.values},
                                     {"error", metrics::spectrum_error(pred, exact.values).value}});
    }
    return doc;
}

std::vector<fs::path> write_outputs(const nlohmann::json& results, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    Output out{out_dir, {}};
    const auto command = results.at("command").get<std::string>();
    try {
        if (command == "gen-data") {
            render_gen_data(results, out);
        } else if (command == "train") {
            render_train(results, out);
        } else if (command == "transfer") {
            render_transfer(results, out);
        } else if (command == "grid-search") {
            render_grid(results, out);
        } else if (command == "multitask") {
            render_multitask(results, out);
        } else if (command == "ablate-reg") {
            render_ablation(results, out);
        } else if (command == "sweep-datasize") {
            render_datasize(results, out);
        } else if (command == "predict") {
            render_predict(results, out);
        } else {
            throw FormatError("results document has unknown command '" + command + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("results document for " + command + ": " + e.what());
    }
    out.put(command + ".json", results.dump(1) + "\n");
    return out.written;
}

int results_status(const nlohmann::json& results) { return results.value("failed", false) ? 3 : 0; }

}  // namespace sxfer::exp
