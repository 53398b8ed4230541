#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "sxfer/optics/spectrum.hpp"

namespace sxfer::metrics {

// Floor applied to the exact value in the denominator of the spectrum error;
// transmission stop-bands drive T_exact towards zero.
inline constexpr double kEpsilonGuard = 1e-3;

// Mean over spectrum points of |prediction - exact| / max(exact, epsilon).
struct SpectrumError {
    double value = 0.0;
    std::size_t n_points = 0;
    double epsilon_guard = kEpsilonGuard;
    std::size_t guard_count = 0;  // points where the floor replaced the exact value
};

SpectrumError spectrum_error(std::span<const double> prediction, std::span<const double> exact,
                             double epsilon_guard = kEpsilonGuard);
// Also requires identical wavelength grids.
SpectrumError spectrum_error(const optics::Spectrum& prediction, const optics::Spectrum& exact,
                             double epsilon_guard = kEpsilonGuard);

// Spectrum error averaged over examples; one example per column.
struct BatchError {
    double mean = 0.0;
    std::size_t examples = 0;
    std::size_t guard_count = 0;
};

BatchError mean_spectrum_error(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& exact,
                               double epsilon_guard = kEpsilonGuard);

// (direct - other) / direct. Negative values mean the alternative is worse.
double relative_reduction(double direct, double other);
inline double relative_reduction(const SpectrumError& direct, const SpectrumError& other) {
    return relative_reduction(direct.value, other.value);
}

}  // namespace sxfer::metrics
