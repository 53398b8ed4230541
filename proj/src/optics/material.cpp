#include "sxfer/optics/material.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sxfer/error.hpp"

namespace sxfer::optics {

namespace {

void check_index(const std::string& name, Complex n) {
    if (!std::isfinite(n.real()) || !std::isfinite(n.imag())) {
        throw ValidationError("material '" + name + "': non-finite refractive index");
    }
    if (n.real() < 1.0) {
        throw ValidationError("material '" + name + "': real part of index must be >= 1");
    }
    if (n.imag() < 0.0) {
        throw ValidationError("material '" + name + "': imaginary part of index must be >= 0");
    }
}

}  // namespace

Material Material::constant(std::string name, MaterialTag tag, Complex index) {
    check_index(name, index);
    Material m;
    m.name_ = std::move(name);
    m.tag_ = tag;
    m.constant_ = index;
    return m;
}

Material Material::tabulated(std::string name, MaterialTag tag, std::vector<IndexSample> table) {
    if (table.size() < 2) {
        throw ValidationError("material '" + name + "': table needs at least two rows");
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
        check_index(name, table[i].index);
        if (i > 0 && !(table[i].wavelength_nm > table[i - 1].wavelength_nm)) {
            throw ValidationError("material '" + name + "': table wavelengths must be strictly increasing");
        }
    }
    Material m;
    m.name_ = std::move(name);
    m.tag_ = tag;
    m.table_ = std::move(table);
    return m;
}

Material Material::vacuum() { return constant("vacuum", MaterialTag::Custom, {1.0, 0.0}); }
Material Material::sio2() { return constant("SiO2", MaterialTag::SiO2, {1.46, 0.0}); }
Material Material::tio2() { return constant("TiO2", MaterialTag::TiO2, {2.40, 0.0}); }

Complex Material::index_at(double wavelength_nm) const {
    if (!(wavelength_nm >= kMinWavelength && wavelength_nm <= kMaxWavelength)) {
        throw RangeError("material '" + name_ + "': wavelength " + std::to_string(wavelength_nm) +
                         " nm outside supported window [380, 820] nm");
    }
    if (table_.empty()) return constant_;

    if (wavelength_nm < table_.front().wavelength_nm || wavelength_nm > table_.back().wavelength_nm) {
        throw RangeError("material '" + name_ + "': wavelength " + std::to_string(wavelength_nm) +
                         " nm outside tabulated range");
    }
    auto upper = std::upper_bound(table_.begin(), table_.end(), wavelength_nm,
                                  [](double wl, const IndexSample& s) { return wl < s.wavelength_nm; });
    if (upper == table_.end()) return table_.back().index;
    auto lower = upper - 1;
    const double t = (wavelength_nm - lower->wavelength_nm) / (upper->wavelength_nm - lower->wavelength_nm);
    return lower->index + t * (upper->index - lower->index);
}

std::string to_string(MaterialTag tag) {
    switch (tag) {
        case MaterialTag::SiO2: return "SiO2";
        case MaterialTag::TiO2: return "TiO2";
        case MaterialTag::Custom: return "custom";
    }
    return "custom";
}

MaterialTag material_tag_from_string(const std::string& text) {
    if (text == "SiO2") return MaterialTag::SiO2;
    if (text == "TiO2") return MaterialTag::TiO2;
    return MaterialTag::Custom;
}

Material material_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw FormatError("material config must be a JSON object");
    static const std::set<std::string> kKeys = {"name", "model", "n", "k", "table", "tag"};
    for (const auto& [key, _] : doc.items()) {
        if (!kKeys.contains(key)) throw FormatError("material config: unknown key '" + key + "'");
    }
    if (!doc.contains("name") || !doc["name"].is_string()) throw FormatError("material config: missing 'name'");
    if (!doc.contains("model") || !doc["model"].is_string()) throw FormatError("material config: missing 'model'");

    const std::string name = doc["name"];
    const MaterialTag tag = material_tag_from_string(doc.value("tag", name));
    const std::string model = doc["model"];
    try {
        if (model == "constant") {
            if (!doc.contains("n")) throw FormatError("material config: constant model needs 'n'");
            return Material::constant(name, tag, {doc["n"].get<double>(), doc.value("k", 0.0)});
        }
        if (model == "table") {
            if (!doc.contains("table") || !doc["table"].is_array()) {
                throw FormatError("material config: table model needs 'table'");
            }
            std::vector<IndexSample> rows;
            for (const auto& row : doc["table"]) {
                if (!row.is_array() || (row.size() != 2 && row.size() != 3)) {
                    throw FormatError("material config: table rows are [nm, n] or [nm, n, k]");
                }
                const double k = row.size() == 3 ? row[2].get<double>() : 0.0;
                rows.push_back({row[0].get<double>(), {row[1].get<double>(), k}});
            }
            return Material::tabulated(name, tag, std::move(rows));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("material config: ") + e.what());
    }
    throw FormatError("material config: unknown model '" + model + "'");
}

nlohmann::json material_to_json(const Material& material) {
    nlohmann::json doc;
    doc["name"] = material.name();
    doc["tag"] = to_string(material.tag());
    if (material.is_tabulated()) {
        doc["model"] = "table";
        auto rows = nlohmann::json::array();
        for (const auto& s : material.table()) {
            rows.push_back({s.wavelength_nm, s.index.real(), s.index.imag()});
        }
        doc["table"] = rows;
    } else {
        const Complex n = material.index_at(kMinWavelength);
        doc["model"] = "constant";
        doc["n"] = n.real();
        doc["k"] = n.imag();
    }
    return doc;
}

Material load_material(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open material config " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("material config " + path.string() + ": " + e.what());
    }
    return material_from_json(doc);
}

}  // namespace sxfer::optics
