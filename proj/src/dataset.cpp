#include "sxfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "sxfer/error.hpp"
#include "sxfer/hash.hpp"
#include "sxfer/io.hpp"

namespace sxfer::data {

namespace {

constexpr std::uint64_t kSplitStream = 1;

const optics::Material& material_for(const TaskSpec& spec, std::size_t layer) {
    return layer % 2 == 0 ? spec.first_material : spec.second_material;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

std::string to_string(TaskKind kind) { return kind == TaskKind::Film ? "film" : "sphere"; }

TaskKind task_kind_from_string(const std::string& text) {
    if (text == "film") return TaskKind::Film;
    if (text == "sphere") return TaskKind::Sphere;
    throw ConfigError("unknown task kind '" + text + "' (expected film or sphere)");
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw FormatError("unknown split tag '" + text + "'");
}

void TaskSpec::validate() const {
    if (layer_count < 1) throw ConfigError("task layer_count must be >= 1");
    if (static_cast<std::size_t>(layer_count) > kMaskWidth) {
        throw ConfigError("task layer_count " + std::to_string(layer_count) + " exceeds mask width " +
                          std::to_string(kMaskWidth));
    }
    // A degenerate range (min == max) is allowed and yields constant thicknesses.
    if (!(thickness_min_nm > 0.0) || !(thickness_min_nm <= thickness_max_nm) || !std::isfinite(thickness_max_nm)) {
        throw ConfigError("task thickness range must satisfy 0 < min <= max");
    }
    grid.validate();
}

std::string TaskSpec::name() const { return to_string(kind) + "-" + std::to_string(layer_count); }

nlohmann::json task_to_json(const TaskSpec& spec) {
    return {{"kind", to_string(spec.kind)},
            {"layer_count", spec.layer_count},
            {"thickness_range_nm", {spec.thickness_min_nm, spec.thickness_max_nm}},
            {"grid", optics::grid_to_json(spec.grid)},
            {"materials", {optics::material_to_json(spec.first_material), optics::material_to_json(spec.second_material)}}};
}

TaskSpec task_from_json(const nlohmann::json& doc) {
    try {
        TaskSpec spec;
        spec.kind = task_kind_from_string(doc.at("kind").get<std::string>());
        spec.layer_count = doc.at("layer_count").get<int>();
        spec.thickness_min_nm = doc.at("thickness_range_nm").at(0).get<double>();
        spec.thickness_max_nm = doc.at("thickness_range_nm").at(1).get<double>();
        spec.grid = optics::grid_from_json(doc.at("grid"));
        spec.first_material = optics::material_from_json(doc.at("materials").at(0));
        spec.second_material = optics::material_from_json(doc.at("materials").at(1));
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("task spec: ") + e.what());
    }
}

SplitCounts split_counts(std::size_t size) {
    const std::size_t held_out = size / 10;
    return {size - 2 * held_out, held_out, held_out};
}

std::vector<std::size_t> LabeledDataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == which) out.push_back(i);
    }
    return out;
}

std::size_t LabeledDataset::count(Split which) const {
    return static_cast<std::size_t>(std::count(split.begin(), split.end(), which));
}

Eigen::MatrixXd LabeledDataset::features_of(Split which) const {
    const auto idx = indices(which);
    Eigen::MatrixXd out(features.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = features.col(static_cast<Eigen::Index>(idx[k]));
    return out;
}

Eigen::MatrixXd LabeledDataset::targets_of(Split which) const {
    const auto idx = indices(which);
    Eigen::MatrixXd out(targets.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = targets.col(static_cast<Eigen::Index>(idx[k]));
    return out;
}

optics::Spectrum LabeledDataset::target_spectrum(std::size_t example) const {
    optics::Spectrum s;
    s.wavelengths = meta.spec.grid.wavelengths();
    const auto col = targets.col(static_cast<Eigen::Index>(example));
    s.values.assign(col.data(), col.data() + col.size());
    return s;
}

void LabeledDataset::validate() const {
    meta.spec.validate();
    const auto n = static_cast<Eigen::Index>(split.size());
    if (features.cols() != n || targets.cols() != n) {
        throw DimensionError("dataset: features, targets and split tags differ in length");
    }
    if (features.rows() != static_cast<Eigen::Index>(meta.mask_width)) {
        throw DimensionError("dataset: feature width does not equal mask_width");
    }
    if (targets.rows() != static_cast<Eigen::Index>(meta.spec.grid.count)) {
        throw DimensionError("dataset: target width does not equal the grid size");
    }
    if (meta.mask_width < static_cast<std::size_t>(meta.spec.layer_count)) {
        throw ValidationError("dataset: mask_width smaller than layer_count");
    }
    const auto layers = static_cast<Eigen::Index>(meta.spec.layer_count);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            const double v = features(i, j);
            if (i >= layers) {
                if (v != 0.0) {
                    throw ValidationError("dataset: example " + std::to_string(j) + " has nonzero padded slot " +
                                          std::to_string(i));
                }
            } else if (!(v >= meta.spec.thickness_min_nm && v <= meta.spec.thickness_max_nm)) {
                throw ValidationError("dataset: example " + std::to_string(j) + " thickness out of range at slot " +
                                      std::to_string(i));
            }
        }
        for (Eigen::Index i = 0; i < targets.rows(); ++i) {
            const double t = targets(i, j);
            const bool ok = meta.spec.kind == TaskKind::Film ? (t >= 0.0 && t <= 1.0) : (t >= 0.0 && std::isfinite(t));
            if (!ok) {
                throw ValidationError("dataset: example " + std::to_string(j) + " has invalid target at point " +
                                      std::to_string(i));
            }
        }
    }
    const auto expected = split_counts(split.size());
    if (count(Split::Train) != expected.train || count(Split::Val) != expected.val ||
        count(Split::Test) != expected.test) {
        throw ValidationError("dataset: split proportions are not 80/10/10");
    }
}

bool LabeledDataset::operator==(const LabeledDataset& other) const {
    return meta == other.meta && split == other.split && features.rows() == other.features.rows() &&
           features.cols() == other.features.cols() && targets.rows() == other.targets.rows() &&
           targets.cols() == other.targets.cols() && features == other.features && targets == other.targets;
}

std::vector<double> sample_structure(const TaskSpec& spec, Rng& rng) {
    std::vector<double> out(static_cast<std::size_t>(spec.layer_count));
    for (auto& d : out) {
        d = spec.thickness_min_nm == spec.thickness_max_nm ? spec.thickness_min_nm
                                                           : rng.uniform(spec.thickness_min_nm, spec.thickness_max_nm);
    }
    return out;
}

std::vector<double> mask_input(std::span<const double> thicknesses, std::size_t mask_width) {
    if (thicknesses.size() > mask_width) {
        throw DimensionError("mask_input: " + std::to_string(thicknesses.size()) + " thicknesses exceed mask width " +
                             std::to_string(mask_width));
    }
    std::vector<double> out(mask_width, 0.0);
    std::copy(thicknesses.begin(), thicknesses.end(), out.begin());
    return out;
}

optics::FilmStack make_film_stack(const TaskSpec& spec, std::span<const double> thicknesses) {
    optics::FilmStack stack;
    for (std::size_t i = 0; i < thicknesses.size(); ++i) stack.layers.push_back({thicknesses[i], material_for(spec, i)});
    return stack;
}

optics::SphereStack make_sphere_stack(const TaskSpec& spec, std::span<const double> thicknesses) {
    optics::SphereStack stack;
    for (std::size_t i = 0; i < thicknesses.size(); ++i) stack.shells.push_back({thicknesses[i], material_for(spec, i)});
    return stack;
}

optics::Spectrum exact_spectrum(const TaskSpec& spec, std::span<const double> thicknesses) {
    if (spec.kind == TaskKind::Film) return optics::transmission_spectrum(make_film_stack(spec, thicknesses), spec.grid);
    return optics::scattering_spectrum(make_sphere_stack(spec, thicknesses), spec.grid);
}

LabeledDataset generate_dataset(const TaskSpec& spec, std::size_t size, std::uint64_t seed, unsigned jobs) {
    spec.validate();
    if (size < 10) throw ValidationError("dataset size must be >= 10, got " + std::to_string(size));

    LabeledDataset ds;
    ds.meta.spec = spec;
    ds.meta.seed = seed;
    const auto n = static_cast<Eigen::Index>(size);
    ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kMaskWidth), n);
    ds.targets.resize(static_cast<Eigen::Index>(spec.grid.count), n);

    Rng rng(seed);
    std::vector<std::vector<double>> structures(size);
    for (auto& s : structures) s = sample_structure(spec, rng);

    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(substream(seed, kSplitStream));
    split_rng.shuffle(order.begin(), order.end());
    const auto counts = split_counts(size);
    ds.split.resize(size);
    for (std::size_t k = 0; k < size; ++k) {
        ds.split[order[k]] = k < counts.train ? Split::Train : (k < counts.train + counts.val ? Split::Val : Split::Test);
    }

    // Workers write disjoint columns; the first failure by example index is rethrown.
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(size)));
    std::vector<std::exception_ptr> failures(size);
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < size; i += workers) {
            try {
                const auto spectrum = exact_spectrum(spec, structures[i]);
                const auto col = static_cast<Eigen::Index>(i);
                for (std::size_t p = 0; p < spectrum.size(); ++p) ds.targets(static_cast<Eigen::Index>(p), col) = spectrum.values[p];
                for (std::size_t p = 0; p < structures[i].size(); ++p) ds.features(static_cast<Eigen::Index>(p), col) = structures[i][p];
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> threads;
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
    }
    for (std::size_t i = 0; i < size; ++i) {
        if (!failures[i]) continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const NumericalError& e) {
            throw NumericalError("example " + std::to_string(i) + ": " + e.what());
        } catch (const RangeError& e) {
            throw RangeError("example " + std::to_string(i) + ": " + e.what());
        }
    }
    return ds;
}

std::string serialize_dataset(const LabeledDataset& dataset) {
    nlohmann::json header = {{"version", kDatasetFormatVersion},
                             {"task", task_to_json(dataset.meta.spec)},
                             {"kind", to_string(dataset.meta.spec.kind)},
                             {"layer_count", dataset.meta.spec.layer_count},
                             {"mask_width", dataset.meta.mask_width},
                             {"grid", optics::grid_to_json(dataset.meta.spec.grid)},
                             {"seed", dataset.meta.seed},
                             {"size", dataset.size()},
                             {"generator", dataset.meta.generator}};
    std::string out = "# " + header.dump() + "\n";
    for (std::size_t j = 0; j < dataset.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        out += to_string(dataset.split[j]);
        for (Eigen::Index i = 0; i < dataset.features.rows(); ++i) {
            out += ',';
            out += format_double(dataset.features(i, col));
        }
        for (Eigen::Index i = 0; i < dataset.targets.rows(); ++i) {
            out += ',';
            out += format_double(dataset.targets(i, col));
        }
        out += '\n';
    }
    return out;
}

LabeledDataset parse_dataset(const std::string& text) {
    if (text.rfind("# ", 0) != 0) throw FormatError("dataset: missing '# ' JSON header line");
    const auto header_end = text.find('\n');
    if (header_end == std::string::npos) throw FormatError("dataset: header line is not terminated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text.substr(2, header_end - 2));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset: malformed header: ") + e.what());
    }
    LabeledDataset ds;
    std::size_t size = 0;
    try {
        const int version = header.at("version").get<int>();
        if (version != kDatasetFormatVersion) {
            throw FormatError("dataset: version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kDatasetFormatVersion) + ")");
        }
        ds.meta.spec = task_from_json(header.at("task"));
        ds.meta.mask_width = header.at("mask_width").get<std::size_t>();
        ds.meta.seed = header.at("seed").get<std::uint64_t>();
        ds.meta.generator = header.at("generator").get<std::string>();
        size = header.at("size").get<std::size_t>();
        if (header.at("kind").get<std::string>() != to_string(ds.meta.spec.kind) ||
            header.at("layer_count").get<int>() != ds.meta.spec.layer_count ||
            optics::grid_from_json(header.at("grid")) != ds.meta.spec.grid) {
            throw FormatError("dataset: header fields disagree with the embedded task");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset: header field: ") + e.what());
    }

    const std::size_t width = ds.meta.mask_width;
    const std::size_t points = ds.meta.spec.grid.count;
    const std::size_t columns = 1 + width + points;
    ds.features.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(size));
    ds.targets.resize(static_cast<Eigen::Index>(points), static_cast<Eigen::Index>(size));
    ds.split.resize(size);

    std::size_t pos = header_end + 1;
    std::size_t row = 0;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        if (end == std::string::npos) throw FormatError("dataset: row " + std::to_string(row) + " is truncated");
        if (row >= size) throw FormatError("dataset: more rows than the header size " + std::to_string(size));
        const auto fields = split_csv(std::string_view(text).substr(pos, end - pos));
        if (fields.size() != columns) {
            throw FormatError("dataset: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                              " columns, expected " + std::to_string(columns));
        }
        const std::string where = "dataset row " + std::to_string(row);
        ds.split[row] = split_from_string(std::string(fields[0]));
        const auto col = static_cast<Eigen::Index>(row);
        for (std::size_t i = 0; i < width; ++i) ds.features(static_cast<Eigen::Index>(i), col) = parse_double(fields[1 + i], where);
        for (std::size_t i = 0; i < points; ++i) ds.targets(static_cast<Eigen::Index>(i), col) = parse_double(fields[1 + width + i], where);
        ++row;
        pos = end + 1;
    }
    if (row != size) {
        throw FormatError("dataset: header declares " + std::to_string(size) + " rows but file has " + std::to_string(row));
    }
    ds.validate();
    return ds;
}

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_dataset(dataset));
}

LabeledDataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::string dataset_hash(const LabeledDataset& dataset) { return sha256_hex(serialize_dataset(dataset)); }

}  // namespace sxfer::data
