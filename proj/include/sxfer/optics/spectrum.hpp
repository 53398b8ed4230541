#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace sxfer::optics {

// Uniform wavelength grid; the default is 400 nm inclusive to 800 nm
// exclusive in 2 nm steps (200 points).
struct WavelengthGrid {
    double start_nm = 400.0;
    double step_nm = 2.0;
    std::size_t count = 200;

    double at(std::size_t i) const { return start_nm + step_nm * static_cast<double>(i); }
    std::vector<double> wavelengths() const;
    void validate() const;

    bool operator==(const WavelengthGrid&) const = default;
};

nlohmann::json grid_to_json(const WavelengthGrid& grid);
WavelengthGrid grid_from_json(const nlohmann::json& doc);

struct Spectrum {
    std::vector<double> wavelengths;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    // Equal lengths, strictly increasing wavelengths, nonnegative finite values.
    void validate() const;
    bool operator==(const Spectrum&) const = default;
};

}  // namespace sxfer::optics
