#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sxfer::optics {

using Complex = std::complex<double>;

enum class MaterialTag { SiO2, TiO2, Custom };

struct IndexSample {
    double wavelength_nm;
    Complex index;

    bool operator==(const IndexSample&) const = default;
};

// Supported evaluation window for every index model, in nm.
inline constexpr double kMinWavelength = 380.0;
inline constexpr double kMaxWavelength = 820.0;

// Complex refractive index n + ik, either constant or tabulated over wavelength
// with linear interpolation. Im >= 0 is absorption.
class Material {
public:
    static Material constant(std::string name, MaterialTag tag, Complex index);
    static Material tabulated(std::string name, MaterialTag tag, std::vector<IndexSample> table);

    static Material vacuum();
    static Material sio2();  // n = 1.46
    static Material tio2();  // n = 2.40

    const std::string& name() const { return name_; }
    MaterialTag tag() const { return tag_; }
    bool is_tabulated() const { return !table_.empty(); }
    const std::vector<IndexSample>& table() const { return table_; }

    // Throws RangeError outside [kMinWavelength, kMaxWavelength] or the table span.
    Complex index_at(double wavelength_nm) const;

    bool operator==(const Material&) const = default;

private:
    Material() = default;

    std::string name_;
    MaterialTag tag_ = MaterialTag::Custom;
    Complex constant_{1.0, 0.0};
    std::vector<IndexSample> table_;
};

inline Complex refractive_index(const Material& material, double wavelength_nm) {
    return material.index_at(wavelength_nm);
}

std::string to_string(MaterialTag tag);
MaterialTag material_tag_from_string(const std::string& text);

// Config schema: {"name": str, "model": "constant", "n": real, "k": real}
//             or {"name": str, "model": "table", "table": [[nm, n, k], ...]}
Material material_from_json(const nlohmann::json& doc);
nlohmann::json material_to_json(const Material& material);
Material load_material(const std::filesystem::path& path);

}  // namespace sxfer::optics
