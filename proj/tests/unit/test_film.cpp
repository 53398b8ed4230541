#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "oracles/airy.hpp"
#include "sxfer/error.hpp"
#include "sxfer/optics/film.hpp"
#include "sxfer/random.hpp"

using namespace sxfer;
using namespace sxfer::optics;

namespace {

// Random lossless stack with indices in [1, 3] and thicknesses in [0, 200] nm.
FilmStack random_lossless_stack(Rng& rng, std::size_t max_layers) {
    FilmStack stack;
    const auto count = rng.below(max_layers + 1);
    for (std::uint64_t i = 0; i < count; ++i) {
        stack.layers.push_back({rng.uniform(0.0, 200.0),
                                Material::constant("m", MaterialTag::Custom, {rng.uniform(1.0, 3.0), 0.0})});
    }
    return stack;
}

}  // namespace

TEST_CASE("refractive_index models") {
    CHECK(refractive_index(Material::vacuum(), 500.0) == Complex{1.0, 0.0});
    CHECK(refractive_index(Material::sio2(), 632.0) == Complex{1.46, 0.0});
    CHECK(refractive_index(Material::tio2(), 632.0) == Complex{2.40, 0.0});

    const auto table = Material::tabulated("t", MaterialTag::Custom, {{400.0, {2.5, 0.0}}, {800.0, {2.3, 0.0}}});
    CHECK(std::abs(refractive_index(table, 600.0) - Complex{2.4, 0.0}) < 1e-15);
    CHECK(refractive_index(table, 400.0) == Complex{2.5, 0.0});
    CHECK_THROWS_AS(refractive_index(table, 390.0), RangeError);
    CHECK_THROWS_AS(refractive_index(Material::sio2(), 900.0), RangeError);
    CHECK_THROWS_AS(refractive_index(Material::sio2(), 379.0), RangeError);
}

TEST_CASE("material invariants are enforced") {
    CHECK_THROWS_AS(Material::constant("bad", MaterialTag::Custom, {0.9, 0.0}), ValidationError);
    CHECK_THROWS_AS(Material::constant("bad", MaterialTag::Custom, {1.5, -0.1}), ValidationError);
    CHECK_THROWS_AS(Material::tabulated("bad", MaterialTag::Custom, {{500.0, {1.5, 0.0}}, {500.0, {1.6, 0.0}}}),
                    ValidationError);
}

TEST_CASE("material config files") {
    const auto constant = material_from_json(nlohmann::json::parse(R"({"name":"SiO2","model":"constant","n":1.46})"));
    CHECK(constant == Material::sio2());

    const auto table = material_from_json(
        nlohmann::json::parse(R"({"name":"x","model":"table","table":[[380,2.0,0.01],[820,2.2,0.0]]})"));
    CHECK(table.is_tabulated());
    CHECK(material_from_json(material_to_json(table)) == table);

    CHECK_THROWS_AS(material_from_json(nlohmann::json::parse(R"({"name":"x","model":"constant","n":1.5,"q":1})")),
                    FormatError);
    CHECK_THROWS_AS(material_from_json(nlohmann::json::parse(R"({"name":"x","model":"cubic"})")), FormatError);
}

TEST_CASE("layer_characteristic_matrix special thicknesses") {
    const double wl = 550.0;
    const auto zero = layer_characteristic_matrix(0.0, {1.7, 0.0}, wl);
    CHECK((zero - Eigen::Matrix2cd::Identity()).norm() < 1e-15);

    const double n = 1.9;
    const auto half = layer_characteristic_matrix(wl / (2.0 * n), {n, 0.0}, wl);
    CHECK((half + Eigen::Matrix2cd::Identity()).norm() < 1e-12);

    const auto quarter = layer_characteristic_matrix(wl / 8.0, {2.0, 0.0}, wl);
    Eigen::Matrix2cd expected;
    expected << 0.0, Complex(0.0, 0.5), Complex(0.0, 2.0), 0.0;
    CHECK((quarter - expected).norm() < 1e-12);
}

TEST_CASE("characteristic matrices have unit determinant") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Complex n{rng.uniform(1.0, 3.0), rng.uniform(0.0, 0.2)};
        const auto m = layer_characteristic_matrix(rng.uniform(0.0, 300.0), n, rng.uniform(380.0, 820.0));
        CHECK(std::abs(m.determinant() - 1.0) < 1e-12);
    }
}

TEST_CASE("transmittance of simple stacks") {
    CHECK(transmittance(FilmStack{}, 550.0) == doctest::Approx(1.0).epsilon(1e-15));

    FilmStack single;
    single.layers.push_back({50.0, Material::constant("n146", MaterialTag::Custom, {1.46, 0.0})});
    CHECK(std::abs(transmittance(single, 550.0) - oracle::airy_single_film(50.0, 1.46, 550.0)) < 1e-12);

    const auto bare = transmission_spectrum(FilmStack{});
    REQUIRE(bare.size() == 200);
    for (double v : bare.values) CHECK(std::abs(v - 1.0) < 1e-15);
    CHECK(bare.wavelengths.front() == 400.0);
    CHECK(bare.wavelengths.back() == 798.0);
}

TEST_CASE("single-film transmittance matches the Airy formula") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const double d = rng.uniform(1.0, 500.0);
        const double n = rng.uniform(1.0, 3.0);
        const double wl = rng.uniform(380.0, 820.0);
        FilmStack stack;
        stack.layers.push_back({d, Material::constant("n", MaterialTag::Custom, {n, 0.0})});
        CHECK(std::abs(transmittance(stack, wl) - oracle::airy_single_film(d, n, wl)) < 1e-10);
    }
}

TEST_CASE("index-matched spacer adds pure phase") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto stack = random_lossless_stack(rng, 10);
        auto spaced = stack;
        spaced.layers.insert(spaced.layers.begin(), {rng.uniform(1.0, 100.0), Material::vacuum()});
        const double wl = rng.uniform(380.0, 820.0);
        CHECK(std::abs(transmittance(stack, wl) - transmittance(spaced, wl)) < 1e-12);
    }
}

TEST_CASE("spectrum agrees with the scalar operation") {
    FilmStack stack;
    for (int i = 0; i < 8; ++i) stack.layers.push_back({50.0, i % 2 == 0 ? Material::sio2() : Material::tio2()});
    const auto spectrum = transmission_spectrum(stack);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        CHECK(spectrum.values[i] == transmittance(stack, spectrum.wavelengths[i]));
    }
    spectrum.validate();
}

TEST_CASE("lossless stacks conserve energy and are reciprocal") {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const auto stack = random_lossless_stack(rng, 16);
        auto reversed = stack;
        std::reverse(reversed.layers.begin(), reversed.layers.end());
        const auto spectrum = transmission_spectrum(stack);
        for (std::size_t i = 0; i < spectrum.size(); i += 7) {
            const auto response = film_response(stack, spectrum.wavelengths[i]);
            CHECK(std::abs(response.transmittance + response.reflectance - 1.0) < 1e-10);
            CHECK(std::abs(transmittance(reversed, spectrum.wavelengths[i]) - response.transmittance) < 1e-10);
            CHECK(response.transmittance >= 0.0);
            CHECK(response.transmittance <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("zero-thickness and merge invariance") {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        auto stack = random_lossless_stack(rng, 12);
        const double wl = rng.uniform(380.0, 820.0);
        const double base = transmittance(stack, wl);

        auto padded = stack;
        const auto at = rng.below(stack.layers.size() + 1);
        padded.layers.insert(padded.layers.begin() + static_cast<std::ptrdiff_t>(at), {0.0, Material::tio2()});
        CHECK(std::abs(transmittance(padded, wl) - base) < 1e-12);

        if (!stack.layers.empty()) {
            auto split = stack;
            const auto k = rng.below(stack.layers.size());
            auto layer = split.layers[k];
            const double fraction = rng.uniform();
            split.layers[k].thickness_nm = layer.thickness_nm * fraction;
            layer.thickness_nm *= (1.0 - fraction);
            split.layers.insert(split.layers.begin() + static_cast<std::ptrdiff_t>(k) + 1, layer);
            CHECK(std::abs(transmittance(split, wl) - base) < 1e-12);
        }
    }
}

TEST_CASE("absorbing film transmits less than it would without loss") {
    FilmStack lossy;
    lossy.layers.push_back({100.0, Material::constant("a", MaterialTag::Custom, {2.0, 0.1})});
    const auto response = film_response(lossy, 550.0);
    CHECK(response.transmittance + response.reflectance < 1.0);
    CHECK(response.transmittance > 0.0);
}

TEST_CASE("invalid stacks are rejected") {
    FilmStack stack;
    stack.layers.push_back({-1.0, Material::sio2()});
    CHECK_THROWS_AS(transmittance(stack, 500.0), ValidationError);
    stack.layers[0].thickness_nm = std::nan("");
    CHECK_THROWS_AS(transmittance(stack, 500.0), ValidationError);
}
