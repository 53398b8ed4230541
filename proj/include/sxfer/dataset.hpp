#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sxfer/optics/film.hpp"
#include "sxfer/optics/sphere.hpp"
#include "sxfer/random.hpp"

namespace sxfer::data {

// Every task is padded to this input width so weights transfer across tasks.
inline constexpr std::size_t kMaskWidth = 16;
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kGeneratorVersion = "sxfer-datagen-1";

enum class TaskKind { Film, Sphere };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& text);

// Film: layers from the incidence side. Sphere: shells from the core outward,
// the first thickness being the core radius. Materials alternate starting
// with first_material.
struct TaskSpec {
    TaskKind kind = TaskKind::Film;
    int layer_count = 8;
    double thickness_min_nm = 30.0;
    double thickness_max_nm = 70.0;
    optics::WavelengthGrid grid{};
    optics::Material first_material = optics::Material::sio2();
    optics::Material second_material = optics::Material::tio2();

    void validate() const;
    // e.g. "film-8", "sphere-8"
    std::string name() const;
    bool operator==(const TaskSpec&) const = default;
};

nlohmann::json task_to_json(const TaskSpec& spec);
TaskSpec task_from_json(const nlohmann::json& doc);

enum class Split : std::uint8_t { Train, Val, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct DatasetMeta {
    TaskSpec spec;
    std::uint64_t seed = 0;
    std::size_t mask_width = kMaskWidth;
    std::string generator = kGeneratorVersion;
    bool operator==(const DatasetMeta&) const = default;
};

// Column j of features/targets is example j. Features hold raw thicknesses in
// nm with padded slots exactly zero.
struct LabeledDataset {
    DatasetMeta meta;
    Eigen::MatrixXd features;  // mask_width x size
    Eigen::MatrixXd targets;   // grid.count x size
    std::vector<Split> split;

    std::size_t size() const { return split.size(); }
    std::vector<std::size_t> indices(Split which) const;
    std::size_t count(Split which) const;
    // Copies the columns belonging to one split, preserving order.
    Eigen::MatrixXd features_of(Split which) const;
    Eigen::MatrixXd targets_of(Split which) const;
    optics::Spectrum target_spectrum(std::size_t example) const;

    // Mask honesty, thickness range, target validity, split proportions.
    void validate() const;
    bool operator==(const LabeledDataset& other) const;
};

// Per-split sizes for n examples: val = test = floor(n / 10), train takes the rest.
struct SplitCounts {
    std::size_t train, val, test;
};
SplitCounts split_counts(std::size_t size);

std::vector<double> sample_structure(const TaskSpec& spec, Rng& rng);
// Copies thicknesses into a zero-padded vector of the given width.
std::vector<double> mask_input(std::span<const double> thicknesses, std::size_t mask_width);

optics::FilmStack make_film_stack(const TaskSpec& spec, std::span<const double> thicknesses);
optics::SphereStack make_sphere_stack(const TaskSpec& spec, std::span<const double> thicknesses);
// Film transmittance or sphere Q_sca over the task grid.
optics::Spectrum exact_spectrum(const TaskSpec& spec, std::span<const double> thicknesses);

// Structures are drawn sequentially from the seed before any spectra are
// computed, so the result does not depend on `jobs`.
LabeledDataset generate_dataset(const TaskSpec& spec, std::size_t size, std::uint64_t seed, unsigned jobs = 1);

std::string serialize_dataset(const LabeledDataset& dataset);
LabeledDataset parse_dataset(const std::string& text);
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

// SHA-256 of the serialized form.
std::string dataset_hash(const LabeledDataset& dataset);

}  // namespace sxfer::data
