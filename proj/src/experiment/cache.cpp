#include "sxfer/experiment/cache.hpp"

#include <cstdlib>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"
#include "sxfer/io.hpp"
#include "sxfer/nn/checkpoint.hpp"

namespace sxfer::exp {

namespace fs = std::filesystem;

Cache::Cache(fs::path root) : root_(std::move(root)) {}

Cache Cache::from_environment(const fs::path& fallback) {
    const char* env = std::getenv(kCacheEnv);
    if (env != nullptr && *env != '\0') return Cache(env);
    return Cache(fallback);
}

std::string Cache::key_of(const nlohmann::json& description) { return sha256_hex(description.dump()); }

fs::path Cache::entry_path(const std::string& kind, const std::string& key, const std::string& ext) const {
    return root_ / kind / key.substr(0, 2) / (key + ext);
}

namespace {

template <typename Parse>
auto load_entry(const fs::path& path, Parse parse) -> std::optional<decltype(parse(std::string{}))> {
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        return parse(read_file(path));
    } catch (const Error&) {
        return std::nullopt;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

void store_entry(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    write_file_atomic(path, text);
}

}  // namespace

std::optional<nlohmann::json> Cache::load_json(const std::string& kind, const std::string& key) const {
    if (!enabled()) return std::nullopt;
    return load_entry(entry_path(kind, key, ".json"), [&](const std::string& text) {
        auto doc = nlohmann::json::parse(text);
        if (doc.value("key", std::string{}) != key) throw FormatError("cache entry key mismatch");
        return doc.at("value");
    });
}

void Cache::store_json(const std::string& kind, const std::string& key, const nlohmann::json& value) const {
    if (!enabled()) return;
    store_entry(entry_path(kind, key, ".json"), nlohmann::json{{"key", key}, {"value", value}}.dump() + "\n");
}

std::optional<nn::MlpModel> Cache::load_model(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    return load_entry(entry_path("models", key, ".ckpt"), [](const std::string& text) { return nn::parse_model(text); });
}

void Cache::store_model(const std::string& key, const nn::MlpModel& model) const {
    if (!enabled()) return;
    store_entry(entry_path("models", key, ".ckpt"), nn::serialize_model(model));
}

std::optional<data::LabeledDataset> Cache::load_dataset(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    return load_entry(entry_path("datasets", key, ".csv"),
                      [](const std::string& text) { return data::parse_dataset(text); });
}

void Cache::store_dataset(const std::string& key, const data::LabeledDataset& dataset) const {
    if (!enabled()) return;
    store_entry(entry_path("datasets", key, ".csv"), data::serialize_dataset(dataset));
}

}  // namespace sxfer::exp
