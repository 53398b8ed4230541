#include "sxfer/experiment/config.hpp"

#include <set>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"
#include "sxfer/io.hpp"

namespace sxfer::exp {

namespace {

void reject_unknown(const nlohmann::json& doc, const std::set<std::string>& keys, const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (!keys.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

data::TaskSpec task_from_config(const nlohmann::json& doc) {
    reject_unknown(doc, {"kind", "layer_count", "thickness_range_nm", "grid", "materials"}, "task");
    data::TaskSpec spec;
    spec.kind = data::task_kind_from_string(doc.at("kind").get<std::string>());
    spec.layer_count = doc.at("layer_count").get<int>();
    if (doc.contains("thickness_range_nm")) {
        spec.thickness_min_nm = doc["thickness_range_nm"].at(0).get<double>();
        spec.thickness_max_nm = doc["thickness_range_nm"].at(1).get<double>();
    }
    if (doc.contains("grid")) spec.grid = optics::grid_from_json(doc["grid"]);
    if (doc.contains("materials")) {
        if (doc["materials"].size() != 2) throw ConfigError("task: materials must list two entries");
        spec.first_material = optics::material_from_json(doc["materials"][0]);
        spec.second_material = optics::material_from_json(doc["materials"][1]);
    }
    spec.validate();
    return spec;
}

nlohmann::json section_to_json(const TrainSection& s) {
    auto j = nn::train_config_to_json(s.config);
    if (s.auto_batch) j.erase("batch_size");
    j.erase("seed");  // replicate seeds come from the seed protocol
    return j;
}

TrainSection section_from_json(const nlohmann::json& doc, const std::string& where) {
    if (doc.contains("seed")) throw ConfigError(where + ": set the top-level 'seed' instead");
    TrainSection s;
    try {
        s.config = nn::train_config_from_json(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    s.auto_batch = !doc.contains("batch_size");
    return s;
}

}  // namespace

std::string DatasetRef::label() const {
    return task.name() + "-n" + std::to_string(size) + "-s" + std::to_string(seed);
}

nlohmann::json dataset_ref_to_json(const DatasetRef& ref) {
    return {{"task", data::task_to_json(ref.task)}, {"size", ref.size}, {"seed", ref.seed}};
}

DatasetRef dataset_ref_from_json(const nlohmann::json& doc) {
    reject_unknown(doc, {"task", "size", "seed"}, "dataset");
    DatasetRef ref;
    ref.task = task_from_config(doc.at("task"));
    ref.size = doc.value("size", ref.size);
    ref.seed = doc.value("seed", ref.seed);
    if (ref.size == 0) throw ValidationError("dataset size must be positive");
    return ref;
}

nn::TrainConfig TrainSection::resolve(std::size_t train_examples) const {
    auto c = config;
    if (auto_batch) c.batch_size = transfer::default_batch_size(train_examples);
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["seeds"] = c.seeds;
    j["train"] = section_to_json(c.train);
    j["source_train"] = section_to_json(c.source_train);
    if (c.dataset) j["dataset"] = dataset_ref_to_json(*c.dataset);
    if (c.source) j["source"] = dataset_ref_to_json(*c.source);
    if (c.target) j["target"] = dataset_ref_to_json(*c.target);
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : c.tasks) j["tasks"].push_back(dataset_ref_to_json(t));
    j["plans"] = nlohmann::json::array();
    for (const auto& p : c.plans) j["plans"].push_back(transfer::plan_to_json(p));
    j["shared_depths"] = c.shared_depths;
    j["l2_grid"] = c.l2_grid;
    j["l1_grid"] = c.l1_grid;
    j["keep_probs"] = c.keep_probs;
    j["sizes"] = c.sizes;
    j["checkpoint"] = c.checkpoint;
    j["structures"] = c.structures;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    reject_unknown(doc,
                   {"$comment", "seed", "seeds", "train", "source_train", "dataset", "source", "target", "tasks", "plans",
                    "shared_depths", "l2_grid", "l1_grid", "keep_probs", "sizes", "checkpoint", "structures"},
                   "experiment config");
    ExperimentConfig c;
    try {
        c.seed = doc.value("seed", c.seed);
        c.seeds = doc.value("seeds", c.seeds);
        if (c.seeds < 1) throw ConfigError("experiment config: seeds must be >= 1");
        if (doc.contains("train")) c.train = section_from_json(doc["train"], "train");
        c.source_train = doc.contains("source_train") ? section_from_json(doc["source_train"], "source_train") : c.train;
        if (doc.contains("dataset")) c.dataset = dataset_ref_from_json(doc["dataset"]);
        if (doc.contains("source")) c.source = dataset_ref_from_json(doc["source"]);
        if (doc.contains("target")) c.target = dataset_ref_from_json(doc["target"]);
        for (const auto& t : doc.value("tasks", nlohmann::json::array())) c.tasks.push_back(dataset_ref_from_json(t));
        for (const auto& p : doc.value("plans", nlohmann::json::array())) c.plans.push_back(transfer::plan_from_json(p));
        c.shared_depths = doc.value("shared_depths", c.shared_depths);
        c.l2_grid = doc.value("l2_grid", c.l2_grid);
        c.l1_grid = doc.value("l1_grid", c.l1_grid);
        c.keep_probs = doc.value("keep_probs", c.keep_probs);
        c.sizes = doc.value("sizes", c.sizes);
        c.checkpoint = doc.value("checkpoint", c.checkpoint);
        c.structures = doc.value("structures", c.structures);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    } catch (const FormatError& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    for (std::size_t d : c.shared_depths) {
        if (d < 1 || d > transfer::kHiddenLayers) throw ConfigError("experiment config: shared depth out of range");
    }
    for (double v : c.l2_grid) {
        if (!(v >= 0)) throw ConfigError("experiment config: l2_grid values must be >= 0");
    }
    for (double v : c.l1_grid) {
        if (!(v >= 0)) throw ConfigError("experiment config: l1_grid values must be >= 0");
    }
    for (double v : c.keep_probs) {
        if (!(v > 0 && v <= 1)) throw ConfigError("experiment config: keep_probs must lie in (0, 1]");
    }
    for (std::size_t s : c.sizes) {
        if (s < 10) throw ConfigError("experiment config: sizes must be >= 10");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& config) {
    return sha256_hex(config_to_json(config).dump()).substr(0, 16);
}

}  // namespace sxfer::exp
