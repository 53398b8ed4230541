#include "sxfer/optics/sphere.hpp"

#include <cmath>
#include <numbers>

#include "sxfer/error.hpp"

namespace sxfer::optics {

namespace {

constexpr Complex kI{0.0, 1.0};

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void require_argument(int order_max, Complex z) {
    if (order_max < 1) throw RangeError("Riccati-Bessel order_max must be >= 1");
    if (z == Complex{0.0, 0.0}) throw RangeError("Riccati-Bessel argument must be nonzero");
}

// D_n(z) = psi_n'(z) / psi_n(z) for n = 0..n_max, downward recurrence.
std::vector<Complex> log_derivative_psi(int n_max, Complex z) {
    const int start = std::max(n_max, static_cast<int>(std::ceil(std::abs(z)))) + 16;
    Complex d{0.0, 0.0};
    std::vector<Complex> out(static_cast<std::size_t>(n_max) + 1);
    for (int n = start; n > 0; --n) {
        const Complex nz = static_cast<double>(n) / z;
        d = nz - 1.0 / (d + nz);
        if (n - 1 <= n_max) out[static_cast<std::size_t>(n - 1)] = d;
    }
    return out;
}

// Log derivative of xi_n = psi_n - i chi_n and the ratio psi_n / xi_n, both by
// upward recurrence seeded from D_n.
struct OutgoingRatios {
    std::vector<Complex> d3;
    std::vector<Complex> psi_over_xi;
};

OutgoingRatios outgoing_ratios(const std::vector<Complex>& d1, Complex z) {
    const std::size_t count = d1.size();
    OutgoingRatios out{std::vector<Complex>(count), std::vector<Complex>(count)};
    const Complex e2 = std::exp(2.0 * kI * z);
    Complex psi_xi = 0.5 * (1.0 - e2);  // psi_0 xi_0
    out.d3[0] = kI;
    out.psi_over_xi[0] = 0.5 * (1.0 - std::exp(-2.0 * kI * z));
    for (std::size_t n = 1; n < count; ++n) {
        const Complex nz = static_cast<double>(n) / z;
        psi_xi *= (nz - d1[n - 1]) * (nz - out.d3[n - 1]);
        out.d3[n] = d1[n] + kI / psi_xi;
        out.psi_over_xi[n] = out.psi_over_xi[n - 1] * (out.d3[n] + nz) / (d1[n] + nz);
    }
    return out;
}

std::vector<double> shell_radii(const SphereStack& stack) {
    std::vector<double> radii;
    double r = 0.0;
    for (const auto& shell : stack.shells) {
        r += shell.thickness_nm;
        radii.push_back(r);
    }
    return radii;
}

}  // namespace

void SphereStack::validate() const {
    if (shells.empty()) throw ValidationError("sphere stack needs at least one shell");
    for (std::size_t i = 0; i < shells.size(); ++i) {
        const double d = shells[i].thickness_nm;
        if (!std::isfinite(d) || d <= 0.0) {
            throw ValidationError("sphere shell " + std::to_string(i) + " has invalid thickness " + std::to_string(d));
        }
    }
}

double SphereStack::outer_radius_nm() const {
    double r = 0.0;
    for (const auto& shell : shells) r += shell.thickness_nm;
    return r;
}

std::vector<Complex> spherical_bessel_j(int order_max, Complex z) {
    require_argument(order_max, z);
    const int start = order_max + static_cast<int>(std::ceil(std::abs(z))) + 20;
    std::vector<Complex> f(static_cast<std::size_t>(start) + 2, Complex{0.0, 0.0});
    f[static_cast<std::size_t>(start)] = Complex{1e-30, 0.0};
    for (int n = start; n > 0; --n) {
        const auto i = static_cast<std::size_t>(n);
        f[i - 1] = (2.0 * n + 1.0) / z * f[i] - f[i + 1];
        if (std::abs(f[i - 1]) > 1e150) {
            for (std::size_t k = i - 1; k < f.size(); ++k) f[k] *= 1e-150;
        }
    }
    const Complex j0 = std::sin(z) / z;
    const Complex j1 = std::sin(z) / (z * z) - std::cos(z) / z;
    const Complex scale = std::abs(j0) >= std::abs(j1) ? j0 / f[0] : j1 / f[1];
    std::vector<Complex> out(static_cast<std::size_t>(order_max) + 1);
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = f[n] * scale;
        if (!finite(out[n])) {
            throw NumericalError("spherical Bessel j_" + std::to_string(n) + " is not finite");
        }
    }
    return out;
}

std::vector<Complex> spherical_bessel_y(int order_max, Complex z) {
    require_argument(order_max, z);
    std::vector<Complex> y(static_cast<std::size_t>(order_max) + 1);
    y[0] = -std::cos(z) / z;
    y[1] = -std::cos(z) / (z * z) - std::sin(z) / z;
    for (int n = 1; n < order_max; ++n) {
        const auto i = static_cast<std::size_t>(n);
        y[i + 1] = (2.0 * n + 1.0) / z * y[i] - y[i - 1];
        if (!finite(y[i + 1])) {
            throw NumericalError("spherical Bessel y_" + std::to_string(n + 1) + " overflowed");
        }
    }
    return y;
}

RiccatiBessel riccati_bessel(int order_max, Complex z) {
    const auto j = spherical_bessel_j(order_max, z);
    const auto y = spherical_bessel_y(order_max, z);
    const std::size_t count = j.size();
    RiccatiBessel rb{std::vector<Complex>(count), std::vector<Complex>(count), std::vector<Complex>(count),
                     std::vector<Complex>(count)};
    for (std::size_t n = 0; n < count; ++n) {
        rb.psi[n] = z * j[n];
        rb.chi[n] = -z * y[n];
    }
    rb.dpsi[0] = std::cos(z);
    rb.dchi[0] = -std::sin(z);
    for (std::size_t n = 1; n < count; ++n) {
        const Complex nz = static_cast<double>(n) / z;
        rb.dpsi[n] = rb.psi[n - 1] - nz * rb.psi[n];
        rb.dchi[n] = rb.chi[n - 1] - nz * rb.chi[n];
    }
    return rb;
}

int mie_truncation_order(double size_parameter) {
    return static_cast<int>(std::ceil(size_parameter + 4.0 * std::cbrt(size_parameter) + 2.0));
}

double size_parameter(const SphereStack& stack, double wavelength_nm) {
    const double host = stack.host.index_at(wavelength_nm).real();
    return 2.0 * std::numbers::pi * host * stack.outer_radius_nm() / wavelength_nm;
}

MieCoefficients mie_coefficients(const SphereStack& stack, double wavelength_nm, std::optional<int> n_max) {
    stack.validate();
    if (!(wavelength_nm > 0.0)) throw RangeError("wavelength must be positive");

    const Complex host = stack.host.index_at(wavelength_nm);
    const double k = 2.0 * std::numbers::pi * host.real() / wavelength_nm;
    const auto radii = shell_radii(stack);
    const std::size_t layers = radii.size();

    std::vector<Complex> m(layers);
    std::vector<double> x(layers);
    bool index_matched = true;
    for (std::size_t l = 0; l < layers; ++l) {
        m[l] = stack.shells[l].material.index_at(wavelength_nm) / host;
        x[l] = k * radii[l];
        index_matched = index_matched && m[l] == Complex{1.0, 0.0};
    }

    MieCoefficients out;
    out.n_max = n_max.value_or(mie_truncation_order(x.back()));
    if (out.n_max < 1) throw RangeError("Mie truncation order must be >= 1");
    const auto count = static_cast<std::size_t>(out.n_max);
    out.a.assign(count, Complex{0.0, 0.0});
    out.b.assign(count, Complex{0.0, 0.0});
    if (index_matched) return out;

    // H^a_n and H^b_n at the outer surface of the current layer, for n = 0..n_max.
    std::vector<Complex> ha = log_derivative_psi(out.n_max, m[0] * x[0]);
    std::vector<Complex> hb = ha;

    for (std::size_t l = 1; l < layers; ++l) {
        const Complex z_inner = m[l] * x[l - 1];
        const Complex z_outer = m[l] * x[l];
        const auto d1_inner = log_derivative_psi(out.n_max, z_inner);
        const auto d1_outer = log_derivative_psi(out.n_max, z_outer);
        const auto inner = outgoing_ratios(d1_inner, z_inner);
        const auto outer = outgoing_ratios(d1_outer, z_outer);

        for (std::size_t n = 1; n <= count; ++n) {
            const Complex q = inner.psi_over_xi[n] / outer.psi_over_xi[n];
            const Complex g1 = m[l] * ha[n] - m[l - 1] * d1_inner[n];
            const Complex g2 = m[l] * ha[n] - m[l - 1] * inner.d3[n];
            const Complex gt1 = m[l - 1] * hb[n] - m[l] * d1_inner[n];
            const Complex gt2 = m[l - 1] * hb[n] - m[l] * inner.d3[n];
            ha[n] = (g2 * d1_outer[n] - q * g1 * outer.d3[n]) / (g2 - q * g1);
            hb[n] = (gt2 * d1_outer[n] - q * gt1 * outer.d3[n]) / (gt2 - q * gt1);
            if (!finite(ha[n]) || !finite(hb[n])) {
                throw NumericalError("Mie layer recursion became non-finite at shell " + std::to_string(l) +
                                     ", order " + std::to_string(n));
            }
        }
    }

    const double xl = x.back();
    const Complex ml = m.back();
    const RiccatiBessel rb = riccati_bessel(out.n_max, Complex{xl, 0.0});
    for (std::size_t n = 1; n <= count; ++n) {
        const double nx = static_cast<double>(n) / xl;
        const Complex xi_n = rb.psi[n] - kI * rb.chi[n];
        const Complex xi_prev = rb.psi[n - 1] - kI * rb.chi[n - 1];
        const Complex fa = ha[n] / ml + nx;
        const Complex fb = ml * hb[n] + nx;
        out.a[n - 1] = (fa * rb.psi[n] - rb.psi[n - 1]) / (fa * xi_n - xi_prev);
        out.b[n - 1] = (fb * rb.psi[n] - rb.psi[n - 1]) / (fb * xi_n - xi_prev);
        if (!finite(out.a[n - 1]) || !finite(out.b[n - 1])) {
            throw NumericalError("Mie coefficient of order " + std::to_string(n) + " is not finite at shell " +
                                 std::to_string(layers - 1));
        }
    }
    return out;
}

double scattering_efficiency(const MieCoefficients& coefficients, double size_parameter) {
    double sum = 0.0;
    for (std::size_t i = 0; i < coefficients.a.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        sum += (2.0 * n + 1.0) * (std::norm(coefficients.a[i]) + std::norm(coefficients.b[i]));
    }
    return 2.0 * sum / (size_parameter * size_parameter);
}

double scattering_efficiency(const SphereStack& stack, double wavelength_nm, std::optional<int> n_max) {
    return scattering_efficiency(mie_coefficients(stack, wavelength_nm, n_max), size_parameter(stack, wavelength_nm));
}

double scattering_cross_section(const SphereStack& stack, double wavelength_nm) {
    const double r = stack.outer_radius_nm();
    return scattering_efficiency(stack, wavelength_nm) * std::numbers::pi * r * r;
}

Spectrum scattering_spectrum(const SphereStack& stack, const WavelengthGrid& grid, std::optional<int> extra_orders) {
    grid.validate();
    Spectrum out;
    out.wavelengths = grid.wavelengths();
    out.values.resize(grid.count);
    for (std::size_t i = 0; i < grid.count; ++i) {
        const double wl = out.wavelengths[i];
        std::optional<int> n_max;
        if (extra_orders) n_max = mie_truncation_order(size_parameter(stack, wl)) + *extra_orders;
        out.values[i] = scattering_efficiency(stack, wl, n_max);
    }
    return out;
}

}  // namespace sxfer::optics
