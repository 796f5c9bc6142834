#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nmoc/fluctuations.hpp"

namespace nmoc {

/// Smallest symplectic eigenvalue of a two-mode covariance, optionally after flipping the
/// momentum of the optical mode.
inline double symplectic_min(const RealMat4& V, bool partial_transpose = true) {
    require((V - V.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, V.cwiseAbs().maxCoeff()),
            "symplectic_min: covariance is not symmetric");
    const double detA = V.block<2, 2>(0, 0).determinant();
    const double detB = V.block<2, 2>(2, 2).determinant();
    const double detC = V.block<2, 2>(0, 2).determinant();
    const double sigma = detA + detB + (partial_transpose ? -2.0 : 2.0) * detC;
    const double detV = V.determinant();
    double disc = sigma * sigma - 4.0 * detV;
    if (disc < 0.0) {
        if (disc < -1e-10 * std::max(1.0, sigma * sigma))
            throw SolverError("symplectic_min: negative discriminant " + std::to_string(disc));
        disc = 0.0;
    }
    const double s2 = 0.5 * (sigma - std::sqrt(disc));
    if (!(s2 > 0.0)) throw SolverError("symplectic_min: non-positive symplectic eigenvalue");
    return std::sqrt(s2);
}

struct EntanglementSeries {
    std::vector<double> t;
    std::vector<double> s_minus, E_p, E_N;
    std::vector<double> crossings;  // zero crossings of E_p
    std::vector<std::string> failures;

    [[nodiscard]] bool entangled(std::size_t i) const { return E_N[i] > 0.0; }
};

inline double pseudo_entanglement(double s_minus) { return -std::log(2.0 * s_minus); }

inline EntanglementSeries entanglement_series(const CovarianceSeries& cov) {
    EntanglementSeries out;
    for (std::size_t i = 0; i < cov.V.size(); ++i) {
        double s = std::nan("");
        try {
            s = symplectic_min(cov.V[i], true);
        } catch (const std::exception& e) {
            out.failures.push_back("t = " + std::to_string(cov.t[i]) + ": " + e.what());
        }
        const double ep = pseudo_entanglement(s);
        out.t.push_back(cov.t[i]);
        out.s_minus.push_back(s);
        out.E_p.push_back(ep);
        out.E_N.push_back(std::isnan(ep) ? ep : std::max(0.0, ep));
    }
    // Sign changes between values clearly away from zero, so rounding at a vacuum start is not an event.
    constexpr double zero = 1e-12;
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        const double b = out.E_p[i];
        if (std::isnan(b) || std::abs(b) <= zero) continue;
        if (last >= 0) {
            const double a = out.E_p[static_cast<std::size_t>(last)];
            if ((a < 0.0) != (b < 0.0)) {
                const double ta = out.t[static_cast<std::size_t>(last)];
                out.crossings.push_back(ta + a / (a - b) * (out.t[i] - ta));
            }
        }
        last = static_cast<std::ptrdiff_t>(i);
    }
    return out;
}

}  // namespace nmoc
