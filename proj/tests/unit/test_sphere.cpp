#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles/mie_reference.hpp"
#include "sxfer/error.hpp"
#include "sxfer/optics/sphere.hpp"
#include "sxfer/random.hpp"

using namespace sxfer;
using namespace sxfer::optics;

namespace {

Material constant_material(double n) { return Material::constant("n", MaterialTag::Custom, {n, 0.0}); }

double rel_diff(Complex a, Complex b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

SphereStack alternating_stack(const std::vector<double>& thicknesses) {
    SphereStack stack;
    for (std::size_t i = 0; i < thicknesses.size(); ++i) {
        stack.shells.push_back({thicknesses[i], i % 2 == 0 ? Material::sio2() : Material::tio2()});
    }
    return stack;
}

}  // namespace

TEST_CASE("Riccati-Bessel closed forms") {
    const auto rb1 = riccati_bessel(3, {1.0, 0.0});
    CHECK(std::abs(rb1.psi[0] - std::sin(1.0)) < 1e-14);
    CHECK(std::abs(rb1.chi[0] - std::cos(1.0)) < 1e-14);
    CHECK(std::abs(rb1.psi[0].real() - 0.8414709848078965) < 1e-14);
    CHECK(std::abs(rb1.chi[0].real() - 0.5403023058681398) < 1e-14);

    const auto rb2 = riccati_bessel(3, {2.0, 0.0});
    CHECK(std::abs(rb2.psi[1] - (std::sin(2.0) / 2.0 - std::cos(2.0))) < 1e-14);
}

TEST_CASE("spherical Bessel j_n matches closed forms for n = 0, 1, 2") {
    Rng rng(29);
    for (int trial = 0; trial < 2000; ++trial) {
        const double modulus = std::exp(rng.uniform(std::log(0.1), std::log(50.0)));
        const double angle = trial % 2 == 0 ? 0.0 : rng.uniform(-0.1, 0.1);
        const Complex z = std::polar(modulus, angle);
        const auto j = spherical_bessel_j(4, z);
        const Complex s = std::sin(z), c = std::cos(z);
        const Complex j0 = s / z;
        const Complex j1 = s / (z * z) - c / z;
        const Complex j2 = (3.0 / (z * z) - 1.0) * s / z - 3.0 * c / (z * z);
        CHECK(rel_diff(j[0], j0) < 1e-12);
        CHECK(rel_diff(j[1], j1) < 1e-12);
        CHECK(rel_diff(j[2], j2) < 1e-12);
    }
}

TEST_CASE("Riccati-Bessel values agree with the standard special functions") {
    for (double z : {0.3, 1.0, 4.5, 12.0, 21.0}) {
        const auto rb = riccati_bessel(20, {z, 0.0});
        for (unsigned n = 0; n <= 20; ++n) {
            const auto ref = oracle::real_riccati(n, z);
            CHECK(std::abs(rb.psi[n].real() - ref.psi) <= 1e-11 * std::max(1.0, std::abs(ref.psi)));
            CHECK(std::abs(rb.chi[n].real() - ref.chi) <= 1e-11 * std::max(1.0, std::abs(ref.chi)));
            CHECK(std::abs(rb.dpsi[n].real() - ref.dpsi) <= 1e-10 * std::max(1.0, std::abs(ref.dpsi)));
            CHECK(std::abs(rb.dchi[n].real() - ref.dchi) <= 1e-10 * std::max(1.0, std::abs(ref.dchi)));
        }
    }
}

TEST_CASE("Riccati-Bessel preconditions") {
    CHECK_THROWS_AS(riccati_bessel(0, {1.0, 0.0}), RangeError);
    CHECK_THROWS_AS(riccati_bessel(3, {0.0, 0.0}), RangeError);
    CHECK_THROWS_AS(spherical_bessel_y(400, {1e-3, 0.0}), NumericalError);
}

TEST_CASE("index-matched sphere scatters nothing") {
    SphereStack stack;
    for (int i = 0; i < 4; ++i) stack.shells.push_back({40.0, Material::vacuum()});
    const auto c = mie_coefficients(stack, 500.0);
    for (std::size_t n = 0; n < c.a.size(); ++n) {
        CHECK(c.a[n] == Complex{0.0, 0.0});
        CHECK(c.b[n] == Complex{0.0, 0.0});
    }
    CHECK(scattering_efficiency(stack, 500.0) == 0.0);
    const auto spectrum = scattering_spectrum(stack);
    for (double v : spectrum.values) CHECK(v == 0.0);
}

TEST_CASE("truncation rule") {
    CHECK(mie_truncation_order(1.0) == 7);
    CHECK(mie_truncation_order(8.0) == 18);
    const auto stack = alternating_stack({50, 50, 50, 50, 50, 50, 50, 50});
    const auto c = mie_coefficients(stack, 500.0);
    CHECK(c.n_max == mie_truncation_order(size_parameter(stack, 500.0)));
    CHECK(c.a.size() == static_cast<std::size_t>(c.n_max));
}

TEST_CASE("homogeneous sphere matches the reference Mie solution") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const double n = rng.uniform(1.2, 2.6);
        const double radius = rng.uniform(20.0, 500.0);
        const double wl = rng.uniform(400.0, 800.0);
        SphereStack stack;
        stack.shells.push_back({radius, constant_material(n)});
        const auto c = mie_coefficients(stack, wl);
        const double x = size_parameter(stack, wl);
        const auto ref = oracle::homogeneous_mie(n, x, c.n_max);
        for (int k = 0; k < c.n_max; ++k) {
            CHECK(std::abs(c.a[k] - ref.a[k]) < 1e-10);
            CHECK(std::abs(c.b[k] - ref.b[k]) < 1e-10);
        }
    }
}

TEST_CASE("identical shells collapse to the homogeneous sphere") {
    Rng rng(37);
    for (int trial = 0; trial < 200; ++trial) {
        const auto material = constant_material(rng.uniform(1.2, 2.6));
        SphereStack layered;
        for (int i = 0; i < 8; ++i) layered.shells.push_back({rng.uniform(30.0, 70.0), material});
        SphereStack solid;
        solid.shells.push_back({layered.outer_radius_nm(), material});
        const double wl = rng.uniform(400.0, 800.0);
        const auto a = mie_coefficients(layered, wl);
        const auto b = mie_coefficients(solid, wl);
        REQUIRE(a.n_max == b.n_max);
        for (int k = 0; k < a.n_max; ++k) {
            CHECK(std::abs(a.a[k] - b.a[k]) < 1e-10);
            CHECK(std::abs(a.b[k] - b.b[k]) < 1e-10);
        }
        const double qa = scattering_efficiency(layered, wl);
        const double qb = scattering_efficiency(solid, wl);
        CHECK(std::abs(qa - qb) < 1e-10 * std::max(1.0, qb));
    }
}

TEST_CASE("two shells of one material equal a sphere of the outer radius") {
    SphereStack two;
    two.shells = {{60.0, Material::tio2()}, {90.0, Material::tio2()}};
    SphereStack one;
    one.shells = {{150.0, Material::tio2()}};
    const auto a = mie_coefficients(two, 610.0);
    const auto b = mie_coefficients(one, 610.0);
    for (int k = 0; k < a.n_max; ++k) {
        CHECK(std::abs(a.a[k] - b.a[k]) < 1e-10);
        CHECK(std::abs(a.b[k] - b.b[k]) < 1e-10);
    }
}

TEST_CASE("layered coefficients match direct interface matching") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> thickness;
        const auto layers = 2 + rng.below(7);
        for (std::uint64_t i = 0; i < layers; ++i) thickness.push_back(rng.uniform(30.0, 70.0));
        const auto stack = alternating_stack(thickness);
        const double wl = rng.uniform(400.0, 800.0);
        const auto c = mie_coefficients(stack, wl, 6);

        std::vector<double> m, x;
        double r = 0.0;
        for (std::size_t i = 0; i < thickness.size(); ++i) {
            r += thickness[i];
            m.push_back(stack.shells[i].material.index_at(wl).real());
            x.push_back(2.0 * std::numbers::pi * r / wl);
        }
        const auto ref = oracle::stratified_mie(m, x, 6);
        for (int k = 0; k < 6; ++k) {
            CHECK(std::abs(c.a[k] - ref.a[k]) < 1e-9);
            CHECK(std::abs(c.b[k] - ref.b[k]) < 1e-9);
        }
    }
}

TEST_CASE("Rayleigh regime") {
    for (double m : {1.33, 1.5, 2.0}) {
        const double wl = 600.0;
        const double x = 0.01;
        SphereStack stack;
        stack.shells.push_back({x * wl / (2.0 * std::numbers::pi), constant_material(m)});
        CHECK(std::abs(size_parameter(stack, wl) - x) < 1e-15);
        const auto c = mie_coefficients(stack, wl);
        CHECK(std::abs(c.b[0]) / std::abs(c.a[0]) < 1e-3);
        const double polar = (m * m - 1.0) / (m * m + 2.0);
        const double rayleigh = 8.0 / 3.0 * std::pow(x, 4) * polar * polar;
        CHECK(std::abs(scattering_efficiency(stack, wl) - rayleigh) / rayleigh < 0.01);
    }
}

TEST_CASE("coefficients of passive spheres are bounded") {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> t;
        for (int i = 0; i < 8; ++i) t.push_back(rng.uniform(30.0, 70.0));
        const auto c = mie_coefficients(alternating_stack(t), rng.uniform(400.0, 800.0));
        for (int k = 0; k < c.n_max; ++k) {
            CHECK(std::abs(c.a[k]) <= 1.0 + 1e-12);
            CHECK(std::abs(c.b[k]) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("scattering spectrum consistency and truncation stability") {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> t;
        for (int i = 0; i < 8; ++i) t.push_back(rng.uniform(30.0, 70.0));
        const auto stack = alternating_stack(t);
        const auto spectrum = scattering_spectrum(stack);
        const auto extended = scattering_spectrum(stack, {}, 5);
        spectrum.validate();
        for (std::size_t i = 0; i < spectrum.size(); ++i) {
            CHECK(spectrum.values[i] == scattering_efficiency(stack, spectrum.wavelengths[i]));
            CHECK(spectrum.values[i] > 0.0);
            CHECK(std::abs(extended.values[i] - spectrum.values[i]) < 1e-8 * spectrum.values[i]);
        }
    }
}

TEST_CASE("cross section is efficiency times geometric area") {
    const auto stack = alternating_stack({50, 40});
    const double r = 90.0;
    CHECK(scattering_cross_section(stack, 500.0) ==
          doctest::Approx(scattering_efficiency(stack, 500.0) * std::numbers::pi * r * r).epsilon(1e-14));
}

TEST_CASE("sphere validation") {
    CHECK_THROWS_AS(mie_coefficients(SphereStack{}, 500.0), ValidationError);
    SphereStack bad;
    bad.shells.push_back({0.0, Material::sio2()});
    CHECK_THROWS_AS(mie_coefficients(bad, 500.0), ValidationError);
}
