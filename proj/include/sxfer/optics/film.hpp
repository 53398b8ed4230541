#pragma once

#include <vector>

#include <Eigen/Core>

#include "sxfer/optics/material.hpp"
#include "sxfer/optics/spectrum.hpp"

namespace sxfer::optics {

struct FilmLayer {
    double thickness_nm;
    Material material;
};

// Planar stack at normal incidence. Layers are listed from the incidence side.
struct FilmStack {
    std::vector<FilmLayer> layers;
    Material ambient_in = Material::vacuum();
    Material ambient_out = Material::vacuum();

    // Thicknesses must be finite and >= 0; a zero-thickness layer is a no-op.
    void validate() const;
};

// Characteristic matrix [[cos d, i sin d / n], [i n sin d, cos d]], d = 2 pi n t / wavelength.
Eigen::Matrix2cd layer_characteristic_matrix(double thickness_nm, Complex index, double wavelength_nm);

struct FilmResponse {
    Complex t;            // amplitude transmission coefficient
    Complex r;            // amplitude reflection coefficient
    double transmittance;  // Re(n_out)/Re(n_in) |t|^2
    double reflectance;    // |r|^2
};

FilmResponse film_response(const FilmStack& stack, double wavelength_nm);

inline double transmittance(const FilmStack& stack, double wavelength_nm) {
    return film_response(stack, wavelength_nm).transmittance;
}

Spectrum transmission_spectrum(const FilmStack& stack, const WavelengthGrid& grid = {});

}  // namespace sxfer::optics
