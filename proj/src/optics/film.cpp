#include "sxfer/optics/film.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sxfer/error.hpp"

namespace sxfer::optics {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::string describe(const FilmStack& stack, double wavelength_nm) {
    std::ostringstream os;
    os << "film stack [";
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        if (i) os << ", ";
        os << stack.layers[i].thickness_nm << " nm " << stack.layers[i].material.name();
    }
    os << "] at " << wavelength_nm << " nm";
    return os.str();
}

}  // namespace

void FilmStack::validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const double d = layers[i].thickness_nm;
        if (!std::isfinite(d) || d < 0.0) {
            throw ValidationError("film layer " + std::to_string(i) + " has invalid thickness " + std::to_string(d));
        }
    }
}

Eigen::Matrix2cd layer_characteristic_matrix(double thickness_nm, Complex index, double wavelength_nm) {
    const Complex phase = 2.0 * std::numbers::pi * index * thickness_nm / wavelength_nm;
    const Complex c = std::cos(phase);
    const Complex s = std::sin(phase);
    const Complex i{0.0, 1.0};
    Eigen::Matrix2cd m;
    m << c, i * s / index,
         i * index * s, c;
    return m;
}

FilmResponse film_response(const FilmStack& stack, double wavelength_nm) {
    stack.validate();
    // Materials store n + ik with k >= 0 as absorption; the characteristic
    // matrix uses the n - ik convention.
    const Complex eta_in = std::conj(stack.ambient_in.index_at(wavelength_nm));
    const Complex eta_out = std::conj(stack.ambient_out.index_at(wavelength_nm));

    Eigen::Matrix2cd total = Eigen::Matrix2cd::Identity();
    for (const auto& layer : stack.layers) {
        total = total * layer_characteristic_matrix(layer.thickness_nm, std::conj(layer.material.index_at(wavelength_nm)),
                                                    wavelength_nm);
    }

    // [B, C]^T = M [1, eta_out]^T
    const Complex b = total(0, 0) + total(0, 1) * eta_out;
    const Complex c = total(1, 0) + total(1, 1) * eta_out;
    const Complex denom = eta_in * b + c;

    FilmResponse out;
    out.t = 2.0 * eta_in / denom;
    out.r = (eta_in * b - c) / denom;
    out.transmittance = eta_out.real() / eta_in.real() * std::norm(out.t);
    out.reflectance = std::norm(out.r);
    if (!finite(out.t) || !finite(out.r) || !std::isfinite(out.transmittance)) {
        throw NumericalError("non-finite transfer-matrix result for " + describe(stack, wavelength_nm));
    }
    return out;
}

Spectrum transmission_spectrum(const FilmStack& stack, const WavelengthGrid& grid) {
    grid.validate();
    Spectrum out;
    out.wavelengths = grid.wavelengths();
    out.values.resize(grid.count);
    for (std::size_t i = 0; i < grid.count; ++i) {
        out.values[i] = transmittance(stack, out.wavelengths[i]);
    }
    return out;
}

}  // namespace sxfer::optics
