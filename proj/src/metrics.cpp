#include "sxfer/metrics.hpp"

#include <cmath>

#include "sxfer/error.hpp"

namespace sxfer::metrics {

SpectrumError spectrum_error(std::span<const double> prediction, std::span<const double> exact,
                             double epsilon_guard) {
    if (prediction.size() != exact.size()) {
        throw DimensionError("spectrum error: prediction has " + std::to_string(prediction.size()) +
                             " points, exact has " + std::to_string(exact.size()));
    }
    if (exact.empty()) throw DimensionError("spectrum error: empty spectra");
    SpectrumError out;
    out.n_points = exact.size();
    out.epsilon_guard = epsilon_guard;
    double sum = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        if (exact[i] < 0.0) throw ValidationError("spectrum error: exact value is negative at point " + std::to_string(i));
        double denom = exact[i];
        if (denom < epsilon_guard) {
            denom = epsilon_guard;
            ++out.guard_count;
        }
        sum += std::abs(prediction[i] - exact[i]) / denom;
    }
    out.value = sum / static_cast<double>(exact.size());
    return out;
}

SpectrumError spectrum_error(const optics::Spectrum& prediction, const optics::Spectrum& exact,
                             double epsilon_guard) {
    if (prediction.wavelengths != exact.wavelengths) {
        throw DimensionError("spectrum error: wavelength grids differ");
    }
    return spectrum_error(prediction.values, exact.values, epsilon_guard);
}

BatchError mean_spectrum_error(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& exact,
                               double epsilon_guard) {
    if (predictions.rows() != exact.rows() || predictions.cols() != exact.cols()) {
        throw DimensionError("batch spectrum error: shape mismatch");
    }
    BatchError out;
    out.examples = static_cast<std::size_t>(exact.cols());
    if (out.examples == 0) return out;
    double total = 0.0;
    for (Eigen::Index j = 0; j < exact.cols(); ++j) {
        const auto e = spectrum_error(std::span<const double>(predictions.col(j).data(), predictions.rows()),
                                      std::span<const double>(exact.col(j).data(), exact.rows()), epsilon_guard);
        total += e.value;
        out.guard_count += e.guard_count;
    }
    out.mean = total / static_cast<double>(out.examples);
    return out;
}

double relative_reduction(double direct, double other) {
    if (direct == 0.0) throw RangeError("relative reduction: division by a zero direct error");
    return (direct - other) / direct;
}

}  // namespace sxfer::metrics
