#include "sxfer/optics/spectrum.hpp"

#include <cmath>

#include "sxfer/error.hpp"

namespace sxfer::optics {

std::vector<double> WavelengthGrid::wavelengths() const {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = at(i);
    return out;
}

void WavelengthGrid::validate() const {
    if (count == 0) throw ValidationError("wavelength grid is empty");
    if (!(step_nm > 0.0) || !std::isfinite(step_nm)) throw ValidationError("wavelength grid step must be positive");
    if (!(start_nm > 0.0) || !std::isfinite(start_nm)) throw ValidationError("wavelength grid start must be positive");
}

nlohmann::json grid_to_json(const WavelengthGrid& grid) {
    return {{"start_nm", grid.start_nm}, {"step_nm", grid.step_nm}, {"count", grid.count}};
}

WavelengthGrid grid_from_json(const nlohmann::json& doc) {
    try {
        WavelengthGrid grid{doc.at("start_nm").get<double>(), doc.at("step_nm").get<double>(),
                            doc.at("count").get<std::size_t>()};
        grid.validate();
        return grid;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("grid spec: ") + e.what());
    }
}

void Spectrum::validate() const {
    if (wavelengths.size() != values.size()) {
        throw DimensionError("spectrum has " + std::to_string(wavelengths.size()) + " wavelengths but " +
                             std::to_string(values.size()) + " values");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0 && !(wavelengths[i] > wavelengths[i - 1])) {
            throw ValidationError("spectrum wavelengths must be strictly increasing");
        }
        if (!std::isfinite(values[i]) || values[i] < 0.0) {
            throw ValidationError("spectrum value at index " + std::to_string(i) + " is negative or non-finite");
        }
    }
}

}  // namespace sxfer::optics
