#pragma once

#include <optional>
#include <vector>

#include "sxfer/optics/material.hpp"
#include "sxfer/optics/spectrum.hpp"

namespace sxfer::optics {

struct Shell {
    double thickness_nm;
    Material material;
};

// Stratified sphere, innermost first: shells[0].thickness_nm is the core radius.
struct SphereStack {
    std::vector<Shell> shells;
    Material host = Material::vacuum();

    void validate() const;
    double outer_radius_nm() const;
};

// Riccati-Bessel functions psi_n(z) = z j_n(z), chi_n(z) = -z y_n(z) and their
// derivatives for n = 0..order_max.
struct RiccatiBessel {
    std::vector<Complex> psi;
    std::vector<Complex> dpsi;
    std::vector<Complex> chi;
    std::vector<Complex> dchi;
};

// j_n by downward (Miller) recurrence normalized against the closed form of j_0 or j_1.
std::vector<Complex> spherical_bessel_j(int order_max, Complex z);
// y_n by upward recurrence; NumericalError names the order that overflowed.
std::vector<Complex> spherical_bessel_y(int order_max, Complex z);
RiccatiBessel riccati_bessel(int order_max, Complex z);

struct MieCoefficients {
    std::vector<Complex> a;  // a[n-1] holds a_n
    std::vector<Complex> b;
    int n_max = 0;
};

// Series truncation order ceil(x + 4 x^(1/3) + 2) for outer size parameter x.
int mie_truncation_order(double size_parameter);

// Outer size parameter 2 pi n_host r / wavelength.
double size_parameter(const SphereStack& stack, double wavelength_nm);

// Layer-recursive Mie coefficients: logarithmic-derivative ratios recursed
// outward from the core. n_max defaults to mie_truncation_order.
MieCoefficients mie_coefficients(const SphereStack& stack, double wavelength_nm,
                                 std::optional<int> n_max = std::nullopt);

// Q_sca = (2 / x^2) sum (2n + 1)(|a_n|^2 + |b_n|^2).
double scattering_efficiency(const MieCoefficients& coefficients, double size_parameter);
double scattering_efficiency(const SphereStack& stack, double wavelength_nm,
                             std::optional<int> n_max = std::nullopt);

// Cross section in nm^2: Q_sca * pi r_outer^2.
double scattering_cross_section(const SphereStack& stack, double wavelength_nm);

Spectrum scattering_spectrum(const SphereStack& stack, const WavelengthGrid& grid = {},
                             std::optional<int> extra_orders = std::nullopt);

}  // namespace sxfer::optics
