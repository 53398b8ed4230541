#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sxfer/dataset.hpp"
#include "sxfer/nn/mlp.hpp"

namespace sxfer::exp {

// Environment variable that overrides the cache root.
inline constexpr const char* kCacheEnv = "SPECTRA_XFER_CACHE";

// Content-addressed store for generated datasets, trained models and run
// results. Keys are hashes of a JSON description of everything that
// determines the stored value. A default-constructed cache stores nothing.
// Unreadable or damaged entries are treated as misses and overwritten.
class Cache {
public:
    Cache() = default;
    explicit Cache(std::filesystem::path root);

    // $SPECTRA_XFER_CACHE when set and non-empty, else `fallback`.
    static Cache from_environment(const std::filesystem::path& fallback);

    bool enabled() const { return !root_.empty(); }
    const std::filesystem::path& root() const { return root_; }

    static std::string key_of(const nlohmann::json& description);

    std::optional<nlohmann::json> load_json(const std::string& kind, const std::string& key) const;
    void store_json(const std::string& kind, const std::string& key, const nlohmann::json& value) const;

    std::optional<nn::MlpModel> load_model(const std::string& key) const;
    void store_model(const std::string& key, const nn::MlpModel& model) const;

    std::optional<data::LabeledDataset> load_dataset(const std::string& key) const;
    void store_dataset(const std::string& key, const data::LabeledDataset& dataset) const;

    std::filesystem::path entry_path(const std::string& kind, const std::string& key, const std::string& ext) const;

private:
    std::filesystem::path root_;
};

}  // namespace sxfer::exp
