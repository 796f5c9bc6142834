#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nmoc/quadrature.hpp"
#include "nmoc/types.hpp"

namespace nmoc {

enum class BathKind { cavity, mechanical };

struct SpectralParams {
    double eta{0.0};
    double cutoff{1.0};
    double exponent{1.0};
    BathKind kind{BathKind::cavity};

    void validate() const {
        require(std::isfinite(eta) && eta >= 0.0, "spectral: eta must be >= 0");
        require(std::isfinite(cutoff) && cutoff > 0.0, "spectral: cutoff must be > 0");
        require(std::isfinite(exponent) && exponent > 0.0, "spectral: exponent must be > 0");
        require(exponent < 169.0, "spectral: exponent too large, Gamma(s+1) overflows");
    }

    /// Upper end of every frequency integral.
    [[nodiscard]] double omega_max() const { return cutoff * (exponent + 40.0); }

    /// eta * cutoff^2 * Gamma(s+1), the kernel magnitude at t = 0.
    [[nodiscard]] double kernel_scale() const {
        const double v = eta * cutoff * cutoff * std::tgamma(exponent + 1.0);
        if (!std::isfinite(v)) throw ParameterError("spectral: kernel prefactor overflows");
        return v;
    }
};

inline double spectral_density(double omega, const SpectralParams& p) {
    if (!(omega > 0.0)) return 0.0;
    const double x = omega / p.cutoff;
    return 2.0 * pi * p.eta * omega * std::pow(x, p.exponent - 1.0) * std::exp(-x);
}

/// Mean Bose occupation 1/(e^{beta w} - 1); zero for an infinite beta.
inline double bose(double omega, double beta) {
    if (std::isinf(beta)) return 0.0;
    return 1.0 / std::expm1(beta * omega);
}

/// J(w) * n(w), finite at w -> 0.
inline double thermal_density(double omega, const SpectralParams& p, double beta) {
    if (!(omega > 0.0) || std::isinf(beta)) return 0.0;
    const double x = omega / p.cutoff;
    const double ratio = beta * omega < 1e-8 ? 1.0 / beta : omega / std::expm1(beta * omega);
    return 2.0 * pi * p.eta * std::pow(x, p.exponent - 1.0) * std::exp(-x) * ratio;
}

/// Memory function on a uniform grid, optionally backed by an analytic evaluator.
struct Kernel {
    TimeGrid grid;
    std::vector<Complex> values;
    std::function<Complex(double)> closed_form;

    Kernel() = default;
    Kernel(TimeGrid g, std::vector<Complex> v, std::function<Complex(double)> f = {})
        : grid(g), values(std::move(v)), closed_form(std::move(f)) {
        require(values.size() == grid.size, "Kernel: values length must match grid");
    }

    static Kernel tabulate(TimeGrid g, std::function<Complex(double)> f) {
        std::vector<Complex> v(g.size);
        for (std::size_t i = 0; i < g.size; ++i) v[i] = f(g.t(i));
        return Kernel(g, std::move(v), std::move(f));
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] const Complex& operator[](std::size_t i) const { return values[i]; }
    [[nodiscard]] bool has_closed_form() const { return static_cast<bool>(closed_form); }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (const auto& v : values) m = std::max(m, std::abs(v));
        return m;
    }

    /// Largest deviation of the table from the closed form, relative to max|values|.
    [[nodiscard]] double consistency_error() const {
        if (!closed_form) return 0.0;
        double worst = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            worst = std::max(worst, std::abs(values[i] - closed_form(grid.t(i))));
        const double scale = max_abs();
        return scale > 0.0 ? worst / scale : worst;
    }
};

inline Complex cavity_kernel_value(const SpectralParams& p, double omega0, double t) {
    const Complex base{1.0, p.cutoff * t};
    return p.kernel_scale() * std::exp(I * (omega0 * t)) * std::pow(base, -(p.exponent + 1.0));
}

inline double mechanical_kernel_value(const SpectralParams& p, double t) {
    const Complex base{1.0, -p.cutoff * t};
    return p.kernel_scale() * std::pow(base, -(p.exponent + 1.0)).imag();
}

inline Kernel cavity_kernel(const SpectralParams& p, double omega0, const TimeGrid& grid) {
    p.validate();
    require(p.kind == BathKind::cavity, "cavity_kernel: expected cavity bath parameters");
    (void)p.kernel_scale();
    return Kernel::tabulate(grid, [p, omega0](double t) { return cavity_kernel_value(p, omega0, t); });
}

inline Kernel mechanical_kernel(const SpectralParams& p, const TimeGrid& grid) {
    p.validate();
    require(p.kind == BathKind::mechanical, "mechanical_kernel: expected mechanical bath parameters");
    (void)p.kernel_scale();
    return Kernel::tabulate(grid, [p](double t) { return Complex(mechanical_kernel_value(p, t), 0.0); });
}

/// Principal-value transform H(x) = P int_0^inf dw/2pi J(w)/(x - w).
/// Returns the value and the quadrature error estimate.
inline quad::Result<double> hilbert_transform(const SpectralParams& p, double x, double tol = 1e-11) {
    p.validate();
    if (p.eta == 0.0) return {0.0, 0.0, true};
    const double top = p.omega_max();
    const double peak = p.cutoff * p.exponent;
    auto J = [&p](double w) { return spectral_density(w, p); };
    // Absolute floor relative to |H(0)| so that pieces with near-zero integrals terminate.
    const double atol = tol * 2.0 * pi * p.eta * p.cutoff * std::tgamma(p.exponent);
    quad::Result<double> r;
    if (x <= 0.0 || x >= top) {
        auto f = [&](double w) { return J(w) / (x - w); };
        std::vector<double> cuts{0.0};
        if (peak < top) cuts.push_back(peak);
        cuts.push_back(top);
        r = quad::adaptive_pieces(f, cuts, atol, tol);
    } else {
        const double jx = J(x);
        auto f = [&](double w) {
            const double d = x - w;
            return d == 0.0 ? 0.0 : (J(w) - jx) / d;
        };
        std::vector<double> cuts{0.0};
        if (peak < x) cuts.push_back(peak);
        cuts.push_back(x);
        if (peak > x && peak < top) cuts.push_back(peak);
        cuts.push_back(top);
        r = quad::adaptive_pieces(f, cuts, atol, tol);
        r.value += jx * std::log(x / (top - x));
    }
    r.value /= 2.0 * pi;
    r.error /= 2.0 * pi;
    return r;
}

/// Cavity Lamb shift K_c(w) in the frame of the drive.
inline double lamb_shift_cavity(double omega, const SpectralParams& p, double omega0) {
    require(p.kind == BathKind::cavity, "lamb_shift_cavity: expected cavity bath parameters");
    const auto r = hilbert_transform(p, omega + omega0);
    if (!r.converged)
        throw SolverError("lamb_shift_cavity: quadrature did not converge at w = " + std::to_string(omega) +
                          ", error estimate " + std::to_string(r.error));
    return r.value;
}

struct MechanicalShift {
    double K{0.0};
    double J_tilde{0.0};
};

inline MechanicalShift lamb_shift_mech(double omega, const SpectralParams& p) {
    require(p.kind == BathKind::mechanical, "lamb_shift_mech: expected mechanical bath parameters");
    const auto plus = hilbert_transform(p, omega);
    const auto minus = hilbert_transform(p, -omega);
    if (!plus.converged || !minus.converged)
        throw SolverError("lamb_shift_mech: quadrature did not converge at w = " + std::to_string(omega));
    return {0.5 * (plus.value + minus.value), 0.25 * (spectral_density(-omega, p) - spectral_density(omega, p))};
}

/// int_0^inf f_c(u) e^{i nu u} du = J_c(w0 + nu)/2 + i H(w0 + nu).
inline Complex cavity_kernel_integral(const SpectralParams& p, double omega0, double nu) {
    const double x = omega0 + nu;
    const auto h = hilbert_transform(p, x);
    if (!h.converged) throw SolverError("cavity_kernel_integral: quadrature did not converge");
    return {0.5 * spectral_density(x, p), h.value};
}

/// int_0^inf f_m(u) du = eta * cutoff * Gamma(s).
inline double mechanical_kernel_integral(const SpectralParams& p) {
    return p.eta * p.cutoff * std::tgamma(p.exponent);
}

/// Time after which the tail integral of |f| falls below `rel_tol` of the whole, using the
/// (cutoff t)^{-(s+1)} asymptote of both kernels.
inline double kernel_horizon(const SpectralParams& p, double rel_tol = 1e-10) {
    return std::pow(rel_tol, -1.0 / p.exponent) / p.cutoff;
}

/// Real nonnegative density S on [lo, hi] with g(tau) = int S(w) e^{-i w tau} dw.
struct NoiseSpectrum {
    std::function<double(double)> density;
    double lo{0.0};
    double hi{0.0};

    [[nodiscard]] bool empty() const { return !density || hi <= lo; }

    [[nodiscard]] Complex correlation(double tau, double tol = 1e-12) const {
        if (empty()) return {0.0, 0.0};
        auto f = [&](double w) { return density(w) * std::exp(-I * (w * tau)); };
        const double span = hi - lo;
        const int pieces = std::max(1, static_cast<int>(std::ceil(span * std::abs(tau) / (8.0 * pi))));
        std::vector<double> cuts(pieces + 1);
        for (int i = 0; i <= pieces; ++i) cuts[i] = lo + span * i / pieces;
        if (lo < 0.0 && hi > 0.0) {
            cuts.push_back(0.0);
            std::sort(cuts.begin(), cuts.end());
        }
        return quad::adaptive_pieces(f, cuts, 1e-15, tol).value;
    }
};

/// Spectrum of g_m: thermal cosine part plus the vacuum e^{-i w tau} part, with the 1/4pi prefactor.
inline NoiseSpectrum mechanical_noise_spectrum(const SpectralParams& p, double beta) {
    const double top = p.omega_max();
    const bool thermal = !std::isinf(beta);
    return {[p, beta](double w) {
                if (w > 0.0) return (spectral_density(w, p) + thermal_density(w, p, beta)) / (4.0 * pi);
                return thermal_density(-w, p, beta) / (4.0 * pi);
            },
            thermal ? -top : 0.0, top};
}

/// Spectrum of e^{i nu tau} g_c(tau): thermal photons only, the vacuum part lives in f_c.
inline NoiseSpectrum cavity_thermal_spectrum(const SpectralParams& p, double omega0, double beta, double nu = 0.0) {
    if (std::isinf(beta)) return {};
    const double shift = omega0 + nu;
    return {[p, beta, shift](double x) { return thermal_density(x + shift, p, beta) / (2.0 * pi); }, -shift,
            p.omega_max() - shift};
}

struct ThermalKernelSet {
    Kernel g_c;
    Kernel g_tilde_c;
    Kernel g_m;
    double beta_c{std::numeric_limits<double>::infinity()};
    double beta_m{std::numeric_limits<double>::infinity()};
};

/// Tabulates g_c, g~_c = f_c + g_c and g_m on the grid. An infinite beta means a vacuum bath.
inline ThermalKernelSet thermal_kernels(const SpectralParams& pc, const SpectralParams& pm, double omega0,
                                        double beta_c, double beta_m, const TimeGrid& grid) {
    pc.validate();
    pm.validate();
    require(beta_c > 0.0 && beta_m > 0.0, "thermal_kernels: beta must be positive (use inf for vacuum)");
    const auto sc = cavity_thermal_spectrum(pc, omega0, beta_c);
    const auto sm = mechanical_noise_spectrum(pm, beta_m);
    ThermalKernelSet out;
    out.beta_c = beta_c;
    out.beta_m = beta_m;
    std::vector<Complex> gc(grid.size), gt(grid.size), gm(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double t = grid.t(i);
        gc[i] = sc.correlation(t);
        gt[i] = cavity_kernel_value(pc, omega0, t) + gc[i];
        gm[i] = sm.correlation(t);
    }
    out.g_c = Kernel(grid, std::move(gc));
    out.g_tilde_c = Kernel(grid, std::move(gt));
    out.g_m = Kernel(grid, std::move(gm));
    return out;
}

}  // namespace nmoc
