#pragma once

#include <cmath>
#include <limits>

#include "nmoc/spectral.hpp"
#include "nmoc/types.hpp"

namespace nmoc {

/// System parameters in units of the bare mechanical frequency.
struct SystemParams {
    double omega_c{100.0};
    double omega_0{98.0};
    double omega_m{1.0};
    double Delta_m{1.0};
    double g0{0.0};
    double E{0.0};
    Complex alpha_init{0.0, 0.0};
    double q_init{0.0};
    double p_init{0.0};

    [[nodiscard]] double Delta_c() const { return omega_c - omega_0; }

    /// omega_m + eta_m * cutoff_m * Gamma(s_m).
    static double renormalized_mechanical(double omega_m, const SpectralParams& pm) {
        return omega_m + mechanical_kernel_integral(pm);
    }

    void link_displacement() { q_init = g0 / omega_m * std::norm(alpha_init); }

    void validate(const SpectralParams& pm) const {
        require(std::isfinite(omega_c) && std::isfinite(omega_0), "system: frequencies must be finite");
        require(omega_0 > 0.0, "system: drive frequency must be positive");
        require(omega_m == 1.0, "system: frequencies are in units of omega_m, so omega_m must be 1");
        require(std::isfinite(g0) && std::isfinite(E), "system: g0 and E must be finite");
        require(std::isfinite(q_init) && std::isfinite(p_init) && std::isfinite(alpha_init.real()) &&
                    std::isfinite(alpha_init.imag()),
                "system: initial values must be finite");
        const double expected = renormalized_mechanical(omega_m, pm);
        require(std::abs(Delta_m - expected) <= 1e-10 * std::max(1.0, std::abs(expected)),
                "system: Delta_m inconsistent with the mechanical bath");
    }
};

}  // namespace nmoc
